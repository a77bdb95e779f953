"""Probabilists' Hermite polynomials, activation spectra, and alignment constants.

The orthonormal convention is used throughout: h_0 = 1, h_1 = rho,
h_2 = (rho^2 - 1)/sqrt(2), ..., with E[h_l(rho) h_m(rho)] = delta_lm under the
standard Gaussian. No physicists'-convention conversion is exposed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateSpectrum, QuadratureNonconvergent

DEFAULT_TRUNCATION = 40
DEFAULT_NODES = 80
MAX_NODES = 640
CONVERGENCE_TOL = 1e-8


def hermite_polynomial(l: int, rho):
    """Value of the orthonormal Hermite polynomial h_l at rho.

    Uses the stable three-term recurrence
    h_{l+1} = (rho * h_l - sqrt(l) * h_{l-1}) / sqrt(l+1).
    Accepts scalars or arrays.
    """
    if l < 0:
        raise ValueError("polynomial index must be >= 0")
    rho = np.asarray(rho, dtype=float)
    h_prev = np.ones_like(rho)
    if l == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h_cur = rho.copy()
    for j in range(1, l):
        h_next = (rho * h_cur - math.sqrt(j) * h_prev) / math.sqrt(j + 1)
        h_prev, h_cur = h_cur, h_next
    return h_cur if h_cur.ndim else float(h_cur)


def _hermite_matrix(max_l: int, rho: np.ndarray) -> np.ndarray:
    """Rows 0..max_l of the orthonormal Hermite basis evaluated at rho."""
    rho = np.asarray(rho, dtype=float)
    out = np.empty((max_l + 1, rho.size))
    out[0] = 1.0
    if max_l >= 1:
        out[1] = rho
    for j in range(1, max_l):
        out[j + 1] = (rho * out[j] - math.sqrt(j) * out[j - 1]) / math.sqrt(j + 1)
    return out


@dataclass(frozen=True)
class ActivationSpec:
    """Scalar activation, either an explicit Hermite combination or a callable.

    For callables a Lipschitz constant can be declared (metadata only) and
    split_at_zero requests the half-range quadrature rule for kinked functions
    like ReLU.
    """

    name: str
    coeffs: tuple[float, ...] | None = None
    fn: Callable[[np.ndarray], np.ndarray] | None = None
    derivative_spec: "ActivationSpec | None" = field(default=None, repr=False)
    lipschitz: float | None = None
    split_at_zero: bool = False

    def __post_init__(self) -> None:
        if (self.coeffs is None) == (self.fn is None):
            raise ValueError("exactly one of coeffs or fn must be given")
        if self.lipschitz is not None and self.lipschitz <= 0:
            raise ValueError("declared Lipschitz constant must be > 0")

    @property
    def kind(self) -> str:
        return "hermite" if self.coeffs is not None else "callable"

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.coeffs is not None:
            basis = _hermite_matrix(len(self.coeffs) - 1, u.ravel())
            vals = np.asarray(self.coeffs) @ basis
            return vals.reshape(u.shape)
        return self.fn(u)

    def derivative(self) -> "ActivationSpec":
        """Spec of the first derivative.

        Differentiating the orthonormal basis gives h_l' = sqrt(l) h_{l-1}, so
        Hermite combinations stay Hermite combinations.
        """
        if self.derivative_spec is not None:
            return self.derivative_spec
        if self.coeffs is None:
            raise ValueError(f"activation {self.name!r} has no declared derivative")
        dcoeffs = tuple(
            math.sqrt(l) * self.coeffs[l] for l in range(1, len(self.coeffs))
        ) or (0.0,)
        return ActivationSpec(name=f"d({self.name})", coeffs=dcoeffs)


@dataclass(frozen=True)
class HermiteSpectrum:
    """Truncated Hermite coefficients of an activation.

    tail_power bounds the squared-coefficient mass beyond the truncation order
    (zero when the expansion is exact). nodes records the quadrature order that
    produced the coefficients (0 for exact expansions).
    """

    coefficients: np.ndarray
    truncation: int
    tail_power: float = 0.0
    exact: bool = True
    nodes: int = 0

    @property
    def total_power(self) -> float:
        return float(np.sum(self.coefficients**2)) + self.tail_power

    def power_from(self, start: int) -> float:
        return float(np.sum(self.coefficients[start:] ** 2)) + self.tail_power


def _gauss_hermite_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Probabilists' Gauss-Hermite rule: E[f(rho)] ~= sum w_i f(x_i).

    Golub-Welsch on the Jacobi matrix of the orthonormal basis; unlike the
    library routine this stays finite at large node counts (extreme-node
    weights underflow harmlessly to zero).
    """
    jacobi = np.zeros((n, n))
    off = np.sqrt(np.arange(1, n))
    jacobi[np.arange(n - 1), np.arange(1, n)] = off
    jacobi[np.arange(1, n), np.arange(n - 1)] = off
    nodes, vectors = np.linalg.eigh(jacobi)
    return nodes, vectors[0] ** 2


def _half_range_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule for E[f(rho)] split at 0, exact for f smooth on each half line.

    Gauss-Legendre on [0, R] against the explicit Gaussian weight, mirrored to
    the negative axis. R = 12 truncates a tail below double precision.
    """
    t, w = np.polynomial.legendre.leggauss(n)
    r = 12.0
    x_pos = 0.5 * r * (t + 1.0)
    w_pos = 0.5 * r * w * np.exp(-0.5 * x_pos**2) / math.sqrt(2.0 * math.pi)
    return np.concatenate([-x_pos[::-1], x_pos]), np.concatenate([w_pos[::-1], w_pos])


def _quadrature_coeffs(act: ActivationSpec, order: int, nodes: int) -> np.ndarray:
    if act.split_at_zero:
        x, w = _half_range_nodes(nodes)
    else:
        x, w = _gauss_hermite_nodes(nodes)
    basis = _hermite_matrix(order, x)
    return basis @ (w * act(x))


def hermite_coefficients(
    act: ActivationSpec,
    order: int = DEFAULT_TRUNCATION,
    nodes: int = DEFAULT_NODES,
    max_nodes: int = MAX_NODES,
) -> HermiteSpectrum:
    """Coefficients mu_l = E[act(rho) h_l(rho)] for l = 0..order.

    Explicit Hermite combinations return their coefficient list exactly.
    Callables are integrated by quadrature, doubling the node count until the
    coefficients move by less than 1e-8 (QuadratureNonconvergent past the cap).
    """
    if act.coeffs is not None:
        coeffs = np.zeros(order + 1)
        upto = min(order + 1, len(act.coeffs))
        coeffs[:upto] = act.coeffs[:upto]
        tail = float(sum(c**2 for c in act.coeffs[order + 1 :]))
        return HermiteSpectrum(
            coefficients=coeffs,
            truncation=order,
            tail_power=tail,
            exact=tail == 0.0,
            nodes=0,
        )

    cur = _quadrature_coeffs(act, order, nodes)
    n = nodes
    while True:
        if 2 * n > max_nodes:
            raise QuadratureNonconvergent(
                f"coefficients still moving after {n} nodes"
            )
        nxt = _quadrature_coeffs(act, order, 2 * n)
        if float(np.max(np.abs(nxt - cur))) < CONVERGENCE_TOL:
            cur, n = nxt, 2 * n
            break
        cur, n = nxt, 2 * n

    # Parseval remainder: E[act^2] - sum of captured squared coefficients
    if act.split_at_zero:
        x, w = _half_range_nodes(n)
    else:
        x, w = _gauss_hermite_nodes(n)
    second_moment = float(np.sum(w * act(x) ** 2))
    tail = max(second_moment - float(np.sum(cur**2)), 0.0)
    return HermiteSpectrum(
        coefficients=cur, truncation=order, tail_power=tail, exact=False, nodes=n
    )


def gamma_rf_lower_bound(spec: HermiteSpectrum, alpha: float) -> float:
    """Lower bound on the limiting masked-query alignment for the RF model:
    (sum_{l>=2} mu_l^2 alpha^l) / (sum_{l>=1} mu_l^2).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    mu_sq = spec.coefficients**2
    denom = float(np.sum(mu_sq[1:]))
    if denom <= 0.0:
        raise DegenerateSpectrum("all coefficients with l >= 1 vanish")
    powers = alpha ** np.arange(len(mu_sq))
    return float(np.sum(mu_sq[2:] * powers[2:])) / denom


def gamma_ntk_closed_form(spec: HermiteSpectrum, alpha: float) -> float:
    """Closed-form limiting alignment for the NTK model, from the spectrum of
    the activation derivative: alpha * (sum_{l>=1} mu_l^2 alpha^l) / (sum_{l>=1} mu_l^2).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    mu_sq = spec.coefficients**2
    denom = float(np.sum(mu_sq[1:]))
    if denom <= 0.0:
        raise DegenerateSpectrum("all coefficients with l >= 1 vanish")
    powers = alpha ** np.arange(len(mu_sq))
    return alpha * float(np.sum(mu_sq[1:] * powers[1:])) / denom


def series_tail_bound(spec: HermiteSpectrum, alpha: float) -> float:
    """Upper bound on the discarded tail sum_{l>L} mu_l^2 alpha^l.

    Exact (finite) expansions have no tail. Otherwise the tail is dominated
    geometrically by alpha^(L+1) / (1 - alpha) times the captured power.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    if spec.exact or alpha == 0.0:
        return 0.0
    captured = float(np.sum(spec.coefficients**2))
    return alpha ** (spec.truncation + 1) / (1.0 - alpha) * captured


def _relu(u: np.ndarray) -> np.ndarray:
    return np.maximum(u, 0.0)


def _tanh_prime(u: np.ndarray) -> np.ndarray:
    return 1.0 - np.tanh(u) ** 2


_REGISTRY: dict[str, ActivationSpec] = {}


def _register(spec: ActivationSpec) -> ActivationSpec:
    _REGISTRY[spec.name] = spec
    return spec


# Named activations usable from the CLI and sweep configs. For NTK models the
# relevant object is the derivative of the activation; the h0+h1 / h0+h3
# entries below are meant to be used directly as derivative specs.
RELU = _register(
    ActivationSpec(
        name="relu",
        fn=_relu,
        lipschitz=1.0,
        split_at_zero=True,
    )
)
H1_PLUS_H2 = _register(ActivationSpec(name="h1+h2", coeffs=(0.0, 1.0, 1.0)))
H1_PLUS_H4 = _register(ActivationSpec(name="h1+h4", coeffs=(0.0, 1.0, 0.0, 0.0, 1.0)))
H0_PLUS_H1 = _register(ActivationSpec(name="h0+h1", coeffs=(1.0, 1.0)))
H0_PLUS_H3 = _register(ActivationSpec(name="h0+h3", coeffs=(1.0, 0.0, 0.0, 1.0)))
IDENTITY = _register(ActivationSpec(name="identity", coeffs=(0.0, 1.0)))
TANH = _register(
    ActivationSpec(
        name="tanh",
        fn=np.tanh,
        derivative_spec=ActivationSpec(name="d(tanh)", fn=_tanh_prime, lipschitz=1.0),
        lipschitz=1.0,
    )
)


def get_activation(name: str) -> ActivationSpec:
    try:
        return _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise KeyError(f"unknown activation {name!r}; known: {known}") from None


def activation_names() -> list[str]:
    return sorted(_REGISTRY)
