"""Random-feature and tangent-kernel feature maps with kernel-space evaluation.

Tangent features z (x) act'(W0 z) live in dimension k*d and are kept lazy as
the pair (z, act'(W0 z)); every downstream computation (kernels, Gram
matrices, projections) needs only inner products, which factorize as
(z . z') * (act'(W0 z) . act'(W0 z')).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .hermite import DEFAULT_TRUNCATION, ActivationSpec, HermiteSpectrum, hermite_coefficients


def _check_dim(z: np.ndarray, d: int) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (d,):
        raise DimensionMismatch(f"expected vector of length {d}, got shape {z.shape}")
    return z


@dataclass
class LazyKronFeature:
    """Tangent feature z (x) w without materializing the k*d vector."""

    z: np.ndarray
    w: np.ndarray

    def materialize(self) -> np.ndarray:
        return np.kron(self.z, self.w)

    def dot(self, other: "LazyKronFeature") -> float:
        return float(self.z @ other.z) * float(self.w @ other.w)

    def norm_sq(self) -> float:
        return float(self.z @ self.z) * float(self.w @ self.w)

    def __len__(self) -> int:
        return self.z.size * self.w.size


@dataclass(eq=False)
class RFMap:
    """Feature map z -> act(V z) with a fixed Gaussian matrix V (k x d)."""

    v: np.ndarray
    activation: ActivationSpec
    seed: int
    _spectrum: HermiteSpectrum | None = field(default=None, repr=False)

    kind = "rf"

    @property
    def k(self) -> int:
        return self.v.shape[0]

    @property
    def d(self) -> int:
        return self.v.shape[1]

    @property
    def n_params(self) -> int:
        return self.k

    def spectrum(self, order: int = DEFAULT_TRUNCATION) -> HermiteSpectrum:
        if self._spectrum is None or self._spectrum.truncation < order:
            self._spectrum = hermite_coefficients(self.activation, order)
        return self._spectrum

    @property
    def mean_coefficient(self) -> float:
        return float(self.spectrum().coefficients[0])

    def features(self, z: np.ndarray) -> np.ndarray:
        z = _check_dim(z, self.d)
        return self.activation(self.v @ z)

    def feature_matrix(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[1] != self.d:
            raise DimensionMismatch(f"rows have width {rows.shape[1]}, expected {self.d}")
        return self.activation(rows @ self.v.T)

    def centered_features(self, z: np.ndarray) -> np.ndarray:
        return self.features(z) - self.mean_coefficient

    def kernel(self, z: np.ndarray, zp: np.ndarray) -> float:
        return float(self.features(z) @ self.features(zp))

    def prepare(self, rows: np.ndarray) -> "_PreparedRF":
        return _PreparedRF(self, self.feature_matrix(rows))

    def init_output(self, z: np.ndarray) -> float:
        """Model output at the zero parameter vector."""
        return 0.0

    def init_outputs(self, rows: np.ndarray) -> np.ndarray:
        return np.zeros(np.atleast_2d(rows).shape[0])


@dataclass(eq=False)
class NTKMap:
    """Gradient features of a two-layer network at its random initialization.

    w0 has i.i.d. N(0, 1/d) entries; activation_derivative is the spec of the
    derivative of the network activation, applied to the pre-activations.
    """

    w0: np.ndarray
    activation_derivative: ActivationSpec
    seed: int
    _spectrum: HermiteSpectrum | None = field(default=None, repr=False)

    kind = "ntk"

    @property
    def k(self) -> int:
        return self.w0.shape[0]

    @property
    def d(self) -> int:
        return self.w0.shape[1]

    @property
    def n_params(self) -> int:
        return self.k * self.d

    def spectrum(self, order: int = DEFAULT_TRUNCATION) -> HermiteSpectrum:
        if self._spectrum is None or self._spectrum.truncation < order:
            self._spectrum = hermite_coefficients(self.activation_derivative, order)
        return self._spectrum

    @property
    def mean_coefficient(self) -> float:
        return float(self.spectrum().coefficients[0])

    def features(self, z: np.ndarray) -> LazyKronFeature:
        z = _check_dim(z, self.d)
        return LazyKronFeature(z=z, w=self.activation_derivative(self.w0 @ z))

    def feature_matrix(self, rows: np.ndarray) -> np.ndarray:
        """Materialized N x (k d) feature matrix; desk-scale sizes only."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[1] != self.d:
            raise DimensionMismatch(f"rows have width {rows.shape[1]}, expected {self.d}")
        b = self.activation_derivative(rows @ self.w0.T)
        return np.einsum("ni,nj->nij", rows, b).reshape(rows.shape[0], self.d * self.k)

    def centered_features(self, z: np.ndarray) -> LazyKronFeature:
        feat = self.features(z)
        return LazyKronFeature(z=feat.z, w=feat.w - self.mean_coefficient)

    def kernel(self, z: np.ndarray, zp: np.ndarray) -> float:
        return self.features(z).dot(self.features(zp))

    def prepare(self, rows: np.ndarray) -> "_PreparedNTK":
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[1] != self.d:
            raise DimensionMismatch(f"rows have width {rows.shape[1]}, expected {self.d}")
        return _PreparedNTK(self, rows, self.activation_derivative(rows @ self.w0.T))

    def init_output(self, z: np.ndarray) -> float:
        """Linearized model output at the initialization parameters vec(W0)."""
        z = _check_dim(z, self.d)
        pre = self.w0 @ z
        return float(self.activation_derivative(pre) @ pre)

    def init_outputs(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        pre = rows @ self.w0.T
        return np.einsum("nk,nk->n", self.activation_derivative(pre), pre)


class _PreparedRF:
    """RF training rows with their feature matrix precomputed."""

    def __init__(self, fmap: RFMap, phi: np.ndarray):
        self.map = fmap
        self.phi = phi

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    def gram(self) -> np.ndarray:
        k = self.phi @ self.phi.T
        return 0.5 * (k + k.T)

    def kernel_vector(self, z: np.ndarray) -> np.ndarray:
        return self.phi @ self.map.features(z)

    def cross(self, queries: np.ndarray) -> np.ndarray:
        """Kernel evaluations of each query row against each training row."""
        return self.map.feature_matrix(queries) @ self.phi.T


class _PreparedNTK:
    """Tangent-feature training rows kept in factorized (rows, derivs) form."""

    def __init__(self, fmap: NTKMap, rows: np.ndarray, derivs: np.ndarray):
        self.map = fmap
        self.rows = rows
        self.derivs = derivs

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def gram(self) -> np.ndarray:
        k = (self.rows @ self.rows.T) * (self.derivs @ self.derivs.T)
        return 0.5 * (k + k.T)

    def kernel_vector(self, z: np.ndarray) -> np.ndarray:
        feat = self.map.features(z)
        return (self.rows @ feat.z) * (self.derivs @ feat.w)

    def cross(self, queries: np.ndarray) -> np.ndarray:
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        bq = self.map.activation_derivative(queries @ self.map.w0.T)
        return (queries @ self.rows.T) * (bq @ self.derivs.T)


def sample_rf_map(k: int, d: int, activation: ActivationSpec, seed: int) -> RFMap:
    """Draw V with i.i.d. N(0, 1/d) entries, reproducibly from the seed."""
    if k < 1 or d < 1:
        raise ValueError("k and d must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((k, d)) / np.sqrt(d)
    return RFMap(v=v, activation=activation, seed=seed)


def sample_ntk_map(k: int, d: int, activation_derivative: ActivationSpec, seed: int) -> NTKMap:
    """Draw W0 with i.i.d. N(0, 1/d) entries, reproducibly from the seed."""
    if k < 1 or d < 1:
        raise ValueError("k and d must be >= 1")
    rng = np.random.default_rng(seed)
    w0 = rng.standard_normal((k, d)) / np.sqrt(d)
    return NTKMap(w0=w0, activation_derivative=activation_derivative, seed=seed)


def rf_features(fmap: RFMap, z: np.ndarray) -> np.ndarray:
    return fmap.features(z)


def ntk_features(fmap: NTKMap, z: np.ndarray) -> LazyKronFeature:
    return fmap.features(z)


def kernel_eval(fmap, z: np.ndarray, zp: np.ndarray) -> float:
    return fmap.kernel(z, zp)


def centered_features(fmap, z: np.ndarray):
    return fmap.centered_features(z)
