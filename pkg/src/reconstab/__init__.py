"""Min-norm generalized-linear regression, feature alignment, and
masked-query reconstruction attacks, with a seeded sweep harness."""

from . import alignment, attack, data, featuremaps, harness, hermite, linops, trainer, verify
from .errors import ReconstabError

__all__ = [
    "ReconstabError",
    "alignment",
    "attack",
    "data",
    "featuremaps",
    "harness",
    "hermite",
    "linops",
    "trainer",
    "verify",
]

__version__ = "0.1.0"
