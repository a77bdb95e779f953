"""Exception types shared across the package."""


class ReconstabError(Exception):
    """Base class for all package errors."""


class SingularGram(ReconstabError):
    """Gram matrix is singular below the rank tolerance."""


class NotSymmetric(ReconstabError):
    """Matrix expected to be symmetric is not."""


class DimensionMismatch(ReconstabError):
    """Vector/matrix shapes are inconsistent."""


class SingularKernel(ReconstabError):
    """Training kernel cannot be inverted; the model cannot fit the labels."""


class MapMismatch(ReconstabError):
    """Two models do not share the same feature map instance."""


class DegenerateDenominator(ReconstabError):
    """Alignment denominator fell below the relative guard threshold."""


class DegenerateSpectrum(ReconstabError):
    """Hermite spectrum lacks the coefficients the operation requires."""


class QuadratureNonconvergent(ReconstabError):
    """Coefficient estimates kept moving after the node-count cap."""


class ZeroBlock(ReconstabError):
    """A sample block has (near-)zero norm and cannot be normalized."""


class BadMagic(ReconstabError):
    """File magic number does not match the expected format."""


class TruncatedFile(ReconstabError):
    """File payload is shorter than its header promises."""


class DimensionOverflow(ReconstabError):
    """Header dimensions are negative or unreasonably large."""


class ConfigError(ReconstabError):
    """Experiment configuration is invalid."""
