"""Feature alignment between queries and a training sample, and its use as a
stability multiplier.

The alignment of z against z1, given the remaining training rows, is
    F(z, z1) = phi(z) . P_perp phi(z1) / ||P_perp phi(z1)||^2
with P_perp the projector orthogonal to the span of the remaining feature
rows. Everything is evaluated in kernel space:
    phi(a) . P_perp phi(b) = K(a, b) - k_a^T K_-1^{-1} k_b,
so tangent features never need materializing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linops
from .data import generate_synthetic, sample_teacher, _sphere_rows
from .errors import DegenerateDenominator, DegenerateSpectrum
from .featuremaps import sample_ntk_map, sample_rf_map
from .hermite import (
    DEFAULT_TRUNCATION,
    ActivationSpec,
    HermiteSpectrum,
    gamma_ntk_closed_form,
    gamma_rf_lower_bound,
    hermite_coefficients,
    series_tail_bound,
)
from .linops import KernelSolveCache
from .seeding import ROLE_DATA, ROLE_MAP, ROLE_QUERY, derive_seed
from .trainer import fit_leave_one_out, fit_min_norm, stability_eval

DENOMINATOR_GUARD = 1e-10


class AlignmentSolver:
    """Fixed (map, remaining rows) context for repeated alignment queries."""

    def __init__(self, fmap, rows: np.ndarray):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        self.map = fmap
        self.rows = rows
        if rows.shape[0] > 0:
            self.prepared = fmap.prepare(rows)
            self.cache = KernelSolveCache.factor(self.prepared.gram(), p=fmap.n_params)
        else:
            self.prepared = None
            self.cache = None

    def residual_dot(self, za: np.ndarray, zb: np.ndarray) -> float:
        """phi(za) . P_perp phi(zb) in kernel space."""
        base = self.map.kernel(za, zb)
        if self.cache is None:
            return base
        ka = self.prepared.kernel_vector(za)
        kb = self.prepared.kernel_vector(zb)
        return base - float(ka @ self.cache.solve(kb))

    def alignment(self, z: np.ndarray, z1: np.ndarray) -> float:
        num, den = self.alignment_parts(z, z1)
        return num / den

    def alignment_parts(self, z: np.ndarray, z1: np.ndarray) -> tuple[float, float]:
        den = self.residual_dot(z1, z1)
        scale = self.map.kernel(z1, z1)
        if den <= DENOMINATOR_GUARD * scale:
            raise DegenerateDenominator(
                f"projected norm {den:.3e} below {DENOMINATOR_GUARD:.0e} * {scale:.3e}"
            )
        return self.residual_dot(z, z1), den


def feature_alignment(fmap, z_minus1: np.ndarray, z: np.ndarray, z1: np.ndarray) -> float:
    """Alignment of a query z with training sample z1 given the other rows."""
    return AlignmentSolver(fmap, z_minus1).alignment(z, z1)


def feature_alignment_from_vectors(
    phi_z: np.ndarray, phi_z1: np.ndarray, phi_minus1: np.ndarray
) -> float:
    """Materialized-projector route; used where features fit in memory."""
    phi_z = np.asarray(phi_z, dtype=float)
    phi_z1 = np.asarray(phi_z1, dtype=float)
    if phi_minus1.shape[0] > 0:
        resid = linops.residual_projection(phi_minus1, phi_z1)
    else:
        resid = phi_z1
    den = float(resid @ resid)
    scale = float(phi_z1 @ phi_z1)
    if den <= DENOMINATOR_GUARD * scale:
        raise DegenerateDenominator(f"projected norm {den:.3e} too small")
    return float(phi_z @ resid) / den


def verify_stability_identity(
    fmap, dataset, z: np.ndarray, theta0="zero"
) -> tuple[float, float]:
    """Both sides of  S(z) = F(z, z1) * S(z1)  with z1 the first training row.

    lhs comes from two explicit fits; rhs from the projector algebra. The
    caller asserts their equality.
    """
    full = fit_min_norm(fmap, dataset, theta0=theta0)
    loo = fit_leave_one_out(fmap, dataset, 0, theta0=theta0)
    lhs = stability_eval(full, loo, z)
    alignment = feature_alignment(fmap, dataset.z[1:], z, dataset.z[0])
    rhs = alignment * stability_eval(full, loo, dataset.z[0])
    return lhs, rhs


@dataclass
class AlignmentEstimate:
    """Monte-Carlo alignment of masked queries against their originals."""

    mean: float
    std: float
    trials: int
    kind: str
    alpha: float
    activation: str
    lower: float
    upper: float
    closed_form: bool
    ratio_of_means: float
    tail_bound: float
    truncation: int
    values: np.ndarray


@dataclass
class GammaVerdict:
    passed: bool
    mean: float
    lower: float
    upper: float
    slack: float
    closed_form: bool

    @property
    def label(self) -> str:
        return "pass" if self.passed else "fail"


def check_nonlinearity(kind: str, spectrum: HermiteSpectrum, name: str = "") -> None:
    """Reject activation spectra the limit theory cannot cover.

    The random-features result needs a nonzero coefficient at order >= 2; the
    tangent-kernel result needs the derivative non-constant (order >= 1).
    """
    coeffs = spectrum.coefficients
    start = 2 if kind == "rf" else 1
    if not np.any(np.abs(coeffs[start:]) > 1e-10) and spectrum.tail_power <= 1e-12:
        what = "is linear" if kind == "rf" else "has a constant derivative"
        raise DegenerateSpectrum(
            f"activation {name!r} {what}; the masked-query limit degenerates"
        )


def _sample_alignments(
    solver: AlignmentSolver, d_x: int, d_y: int, trials: int, seed: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-trial alignment of a fresh masked pair (z1m, z1); fixed context."""
    values = np.empty(trials)
    nums = np.empty(trials)
    dens = np.empty(trials)
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        x1 = _sphere_rows(rng, 1, d_x)[0]
        y1 = _sphere_rows(rng, 1, d_y)[0]
        x_fresh = _sphere_rows(rng, 1, d_x)[0]
        z1 = np.concatenate([x1, y1])
        z1m = np.concatenate([x_fresh, y1])
        try:
            num, den = solver.alignment_parts(z1m, z1)
        except DegenerateDenominator as exc:
            raise DegenerateDenominator(f"trial {t}: {exc}") from exc
        values[t] = num / den
        nums[t] = num
        dens[t] = den
    return values, nums, dens


def estimate_gamma(
    kind: str,
    activation: ActivationSpec,
    k: int,
    n: int,
    d_x: int,
    d_y: int,
    trials: int,
    master_seed: int,
    truncation: int = DEFAULT_TRUNCATION,
) -> AlignmentEstimate:
    """Monte-Carlo estimate of the limiting masked-query alignment.

    The feature map and the n-1 background rows are sampled once from the
    master seed and held fixed; each trial redraws the attacked sample
    z1 = [x1, y1] and its resampled mask z1m = [x, y1]. For tangent maps the
    activation argument is the spec of the activation derivative.
    """
    if kind not in ("rf", "ntk"):
        raise ValueError(f"unknown map kind {kind!r}")
    if trials < 2:
        raise ValueError("need at least 2 trials")
    if n < 2:
        raise ValueError("need at least one background row (n >= 2)")
    spectrum = hermite_coefficients(activation, truncation)
    check_nonlinearity(kind, spectrum, activation.name)

    d = d_x + d_y
    alpha = d_y / d
    map_seed = derive_seed(master_seed, [ROLE_MAP])
    data_seed = derive_seed(master_seed, [ROLE_DATA])
    query_seed = derive_seed(master_seed, [ROLE_QUERY])
    if kind == "rf":
        fmap = sample_rf_map(k, d, activation, map_seed)
    else:
        fmap = sample_ntk_map(k, d, activation, map_seed)
    background = generate_synthetic(
        n - 1, d_x, d_y, sample_teacher(d_x, data_seed), data_seed
    )
    solver = AlignmentSolver(fmap, background.z)
    values, nums, dens = _sample_alignments(solver, d_x, d_y, trials, query_seed)

    if kind == "ntk":
        ref = gamma_ntk_closed_form(spectrum, alpha)
        lower = upper = ref
        closed = True
    else:
        lower = gamma_rf_lower_bound(spectrum, alpha)
        upper = 1.0
        closed = False
    return AlignmentEstimate(
        mean=float(np.mean(values)),
        std=float(np.std(values, ddof=1)),
        trials=trials,
        kind=kind,
        alpha=alpha,
        activation=activation.name,
        lower=lower,
        upper=upper,
        closed_form=closed,
        ratio_of_means=float(np.mean(nums) / np.mean(dens)),
        tail_bound=series_tail_bound(spectrum, alpha) if alpha < 1.0 else 0.0,
        truncation=spectrum.truncation,
        values=values,
    )


def estimate_gamma_on_instance(
    fmap, z_minus1: np.ndarray, d_x: int, trials: int, seed: int
) -> tuple[float, float]:
    """Mean/std of the masked-query alignment on one fixed instance."""
    rows = np.atleast_2d(z_minus1)
    solver = AlignmentSolver(fmap, rows)
    d_y = rows.shape[1] - d_x
    values, _, _ = _sample_alignments(solver, d_x, d_y, trials, seed)
    return float(np.mean(values)), float(np.std(values, ddof=1))


def compare_gamma_theory(
    est: AlignmentEstimate,
    spectrum: HermiteSpectrum | None = None,
    alpha: float | None = None,
    tolerance: float = 0.05,
) -> GammaVerdict:
    """Check an estimate against its theoretical reference.

    Closed-form references must match within tolerance plus three standard
    errors; bound references must bracket the mean (lower bound softened by
    the same slack, upper by the tolerance alone).
    """
    alpha = est.alpha if alpha is None else alpha
    if spectrum is not None:
        if est.closed_form:
            lower = upper = gamma_ntk_closed_form(spectrum, alpha)
        else:
            lower, upper = gamma_rf_lower_bound(spectrum, alpha), 1.0
    else:
        lower, upper = est.lower, est.upper
    slack = 3.0 * est.std / math.sqrt(est.trials) + tolerance
    if est.closed_form:
        passed = abs(est.mean - lower) <= slack
    else:
        passed = (est.mean >= lower - slack) and (est.mean <= upper + tolerance)
    return GammaVerdict(
        passed=passed,
        mean=est.mean,
        lower=lower,
        upper=upper,
        slack=slack,
        closed_form=est.closed_form,
    )


@dataclass
class AlignmentDecomposition:
    """Diagnostic split of one alignment value into its analysis stages.

    raw = centered + centering_correction and (for RF)
    centered = linearized + linearization_correction, both exactly;
    noise_ratio is the squared fraction of the centered target feature lying
    inside the span of the background rows.
    """

    raw: float
    centered: float
    centering_correction: float
    linearized: float | None
    linearization_correction: float | None
    noise_ratio: float


def alignment_decomposition(
    fmap, z_minus1: np.ndarray, z1: np.ndarray, z1m: np.ndarray,
    max_entries: int = 20_000_000,
) -> AlignmentDecomposition:
    """Stage-by-stage view of F(z1m, z1); materializes features (desk scale)."""
    rows = np.atleast_2d(np.asarray(z_minus1, dtype=float))
    if rows.shape[0] * fmap.n_params > max_entries:
        raise ValueError("instance too large to materialize; reduce sizes")
    phi_rest = fmap.feature_matrix(rows)

    def _vec(feat):
        return feat if isinstance(feat, np.ndarray) else feat.materialize()

    phi1 = _vec(fmap.features(z1))
    phim = _vec(fmap.features(z1m))
    cphi1 = _vec(fmap.centered_features(z1))
    cphim = _vec(fmap.centered_features(z1m))

    raw = feature_alignment_from_vectors(phim, phi1, phi_rest)
    centered = feature_alignment_from_vectors(cphim, cphi1, phi_rest)

    if rows.shape[0] > 0:
        proj_c1 = linops.project_rowspace(phi_rest, cphi1)
    else:
        proj_c1 = np.zeros_like(cphi1)
    resid_c1 = cphi1 - proj_c1
    noise_ratio = float(proj_c1 @ proj_c1) / float(cphi1 @ cphi1)

    linearized = None
    lin_corr = None
    if fmap.kind == "rf":
        mu1 = float(fmap.spectrum().coefficients[1])
        v1 = fmap.v @ z1
        vm = fmap.v @ z1m
        if rows.shape[0] > 0:
            cross = float(vm @ linops.project_rowspace(phi_rest, v1))
        else:
            cross = 0.0
        den = float(resid_c1 @ resid_c1)
        linearized = (float(cphim @ cphi1) - mu1**2 * cross) / den
        lin_corr = centered - linearized
    return AlignmentDecomposition(
        raw=raw,
        centered=centered,
        centering_correction=raw - centered,
        linearized=linearized,
        linearization_correction=lin_corr,
        noise_ratio=noise_ratio,
    )
