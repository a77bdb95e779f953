"""Masked-query reconstruction attack and its covariance diagnostics.

The attacker queries the trained model with each training row's mask
z_i^m = [x, y_i] (the informative block replaced, the noise block kept
bit-exactly) and reads the label off the output: sign for binary targets,
argmax for one-hot targets, ties broken toward the lowest class index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alignment import AlignmentSolver, check_nonlinearity
from .data import LabeledDataset, MaskStrategy, generate_synthetic, mask_sample, sample_teacher, _sphere_rows
from .errors import MapMismatch
from .featuremaps import sample_ntk_map, sample_rf_map
from .hermite import ActivationSpec, hermite_coefficients
from .seeding import ROLE_DATA, ROLE_MAP, ROLE_QUERY, derive_seed
from .trainer import TrainedModel, fit_min_norm


def sign_readout(values: np.ndarray) -> np.ndarray:
    """Binary readout with the 0-output tie mapped to +1."""
    return np.where(np.asarray(values) >= 0.0, 1.0, -1.0)


def argmax_readout(values: np.ndarray) -> np.ndarray:
    """Multi-class readout; np.argmax already prefers the lowest index on ties."""
    return np.argmax(np.atleast_2d(values), axis=1)


@dataclass
class QueryBatch:
    """One masked row per training sample."""

    rows: np.ndarray
    kind: str
    seed: int

    @property
    def n(self) -> int:
        return self.rows.shape[0]


@dataclass
class AttackReport:
    attack_accuracy: float
    outputs: np.ndarray
    readout: str
    n: int
    test_accuracy: float | None = None


def build_query_batch(dataset: LabeledDataset, strategy: MaskStrategy) -> QueryBatch:
    """Mask every training row; resampled x-blocks get per-row substreams."""
    rows = np.asarray(
        [mask_sample(z, dataset.d_x, strategy, index=i) for i, z in enumerate(dataset.z)]
    )
    return QueryBatch(rows=rows, kind=strategy.kind, seed=strategy.seed)


def run_attack(
    model: TrainedModel, batch: QueryBatch, labels: np.ndarray, readout: str
) -> AttackReport:
    """Fraction of training labels recovered from the masked queries."""
    labels = np.asarray(labels)
    if batch.n != model.n_train or batch.n != labels.shape[0]:
        raise MapMismatch(
            f"batch of {batch.n} rows does not match model fitted on "
            f"{model.n_train} samples with {labels.shape[0]} labels"
        )
    outputs = model.predict_many(batch.rows)
    if readout == "sign":
        hits = sign_readout(outputs) == labels
    elif readout == "argmax":
        truth = np.argmax(labels, axis=1) if labels.ndim == 2 else labels.astype(int)
        hits = argmax_readout(outputs) == truth
    else:
        raise ValueError(f"unknown readout {readout!r}")
    return AttackReport(
        attack_accuracy=float(np.mean(hits)),
        outputs=outputs,
        readout=readout,
        n=batch.n,
    )


def _covariance(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Empirical covariance and a delta-method standard error."""
    products = (a - a.mean()) * (b - b.mean())
    cov = float(products.mean())
    se = float(np.std(products, ddof=1) / math.sqrt(len(products)))
    return cov, se


@dataclass
class CovarianceDiagnostic:
    """Joint statistics of the attack output and the hidden label.

    The proportionality between cov_attack and gamma_mean * cov_stability is
    the testable equality; the two bound fields are reported in both plausible
    readings (product of variances as written, and with the square root from a
    literal Cauchy-Schwarz application) and asserted by neither.
    """

    trials: int
    alpha: float
    gamma_mean: float
    cov_attack: float
    se_cov_attack: float
    cov_stability: float
    se_cov_stability: float
    scaled_cov_stability: float
    first_equality_gap: float
    combined_se: float
    var_stability: float
    var_labels: float
    bound_as_written: float
    bound_sqrt: float


def covariance_diagnostic(
    kind: str,
    activation: ActivationSpec,
    k: int,
    n: int,
    d_x: int,
    d_y: int,
    trials: int,
    master_seed: int,
    mask: str = "resample",
    theta0="zero",
    label_fn=None,
    fmap=None,
) -> CovarianceDiagnostic:
    """Estimate Cov(attack output, label) and its stability-side counterpart.

    The background rows, their labels, and the feature map stay fixed; each
    trial redraws the attacked sample, refits the interpolator on the full set,
    and queries it with the masked sample. label_fn overrides the teacher
    labeling (e.g. to force constant labels); fmap injects a prebuilt feature
    map (bypassing sampling and the nonlinearity screen) for constructed
    scenarios such as feature maps that ignore the noise block.
    """
    if trials < 10:
        raise ValueError("need at least 10 trials")
    d = d_x + d_y
    map_seed = derive_seed(master_seed, [ROLE_MAP])
    data_seed = derive_seed(master_seed, [ROLE_DATA])
    query_seed = derive_seed(master_seed, [ROLE_QUERY])
    if fmap is None:
        spectrum = hermite_coefficients(activation)
        check_nonlinearity(kind, spectrum, activation.name)
        fmap = (
            sample_rf_map(k, d, activation, map_seed)
            if kind == "rf"
            else sample_ntk_map(k, d, activation, map_seed)
        )
    teacher = sample_teacher(d_x, data_seed)
    if label_fn is None:
        label_fn = teacher.label
    background = generate_synthetic(n - 1, d_x, d_y, teacher, data_seed)
    g_rest = np.asarray([label_fn(x) for x in background.x_block()])
    background = LabeledDataset(z=background.z, g=g_rest, d_x=d_x, d_y=d_y)

    loo_model = fit_min_norm(fmap, background, theta0=theta0)
    solver = AlignmentSolver(fmap, background.z)

    attack_out = np.empty(trials)
    stability = np.empty(trials)
    labels = np.empty(trials)
    alignments = np.empty(trials)
    for t in range(trials):
        rng = np.random.default_rng([query_seed, t])
        x1 = _sphere_rows(rng, 1, d_x)[0]
        y1 = _sphere_rows(rng, 1, d_y)[0]
        z1 = np.concatenate([x1, y1])
        g1 = float(label_fn(x1))
        full = LabeledDataset(
            z=np.vstack([z1[None, :], background.z]),
            g=np.concatenate([[g1], g_rest]),
            d_x=d_x,
            d_y=d_y,
        )
        model = fit_min_norm(fmap, full, theta0=theta0)
        z1m = mask_sample(z1, d_x, MaskStrategy(mask, seed=derive_seed(query_seed, [t])))
        attack_out[t] = model.predict(z1m)
        stability[t] = g1 - loo_model.predict(z1)
        labels[t] = g1
        alignments[t] = solver.alignment(z1m, z1)

    gamma_mean = float(np.mean(alignments))
    cov_attack, se_attack = _covariance(attack_out, labels)
    cov_stab, se_stab = _covariance(stability, labels)
    var_s = float(np.var(stability, ddof=1))
    var_g = float(np.var(labels, ddof=1))
    combined = math.sqrt(se_attack**2 + (gamma_mean * se_stab) ** 2)
    return CovarianceDiagnostic(
        trials=trials,
        alpha=d_y / d,
        gamma_mean=gamma_mean,
        cov_attack=cov_attack,
        se_cov_attack=se_attack,
        cov_stability=cov_stab,
        se_cov_stability=se_stab,
        scaled_cov_stability=gamma_mean * cov_stab,
        first_equality_gap=abs(cov_attack - gamma_mean * cov_stab),
        combined_se=combined,
        var_stability=var_s,
        var_labels=var_g,
        bound_as_written=gamma_mean * var_s * var_g,
        bound_sqrt=gamma_mean * math.sqrt(max(var_s * var_g, 0.0)),
    )
