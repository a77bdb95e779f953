"""Min-norm interpolation in kernel space, leave-one-out refits, evaluation.

The fitted correction lives in the row span of the feature matrix, so the
model is stored through its dual coefficients c = K^{-1}(G - f(Z, theta0)) and
predictions are kernel evaluations; explicit parameter vectors are
materialized only on demand at desk scale. No ridge term is ever added: a
singular kernel is a hard error because every downstream identity presumes
exact interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .errors import MapMismatch, SingularGram, SingularKernel
from .linops import KernelSolveCache


@dataclass
class FitReport:
    residual_norm: float
    max_residual: float
    min_eig: float
    max_eig: float
    condition: float
    theta0_policy: str


@dataclass
class EvalReport:
    """Monte-Carlo estimate of the squared-residual risk plus readout accuracy."""

    error: float
    std_error: float
    accuracy: float
    n_test: int


@dataclass(eq=False)
class TrainedModel:
    """Interpolating fit: predictions are f(z) = f0(z) + k_z . c.

    f0 is the model output at the initialization theta0 ("zero" makes it
    vanish; "init" uses the map's native initialization; an explicit vector is
    accepted for desk-scale experiments).
    """

    map: object
    prepared: object
    targets: np.ndarray
    dual_coefs: np.ndarray
    f0_train: np.ndarray
    theta0_policy: str
    theta0_vector: np.ndarray | None
    cache: KernelSolveCache | None
    report: FitReport

    @property
    def n_train(self) -> int:
        return self.prepared.n

    def _f0(self, z: np.ndarray) -> float:
        if self.theta0_policy == "zero":
            return 0.0
        if self.theta0_policy == "init":
            return self.map.init_output(z)
        return float(self.map.features(z) @ self.theta0_vector)

    def _f0_many(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(rows)
        if self.theta0_policy == "zero":
            return np.zeros(rows.shape[0])
        if self.theta0_policy == "init":
            return self.map.init_outputs(rows)
        return self.map.feature_matrix(rows) @ self.theta0_vector

    def predict(self, z: np.ndarray):
        out = self._f0(z) + self.prepared.kernel_vector(z) @ self.dual_coefs
        return float(out) if np.ndim(out) == 0 else out

    def predict_many(self, rows: np.ndarray) -> np.ndarray:
        cross = self.prepared.cross(rows)
        out = cross @ self.dual_coefs
        f0 = self._f0_many(rows)
        return out + (f0[:, None] if out.ndim == 2 else f0)

    def materialize_theta(self) -> np.ndarray:
        """Explicit parameter vector theta* (desk scale only for tangent maps)."""
        if hasattr(self.prepared, "phi"):
            phi = self.prepared.phi
        else:
            phi = self.map.feature_matrix(self.prepared.rows)
        correction = phi.T @ self.dual_coefs
        if self.theta0_policy == "zero":
            return correction
        if self.theta0_policy == "init":
            # vec(W0) in the same layout as the z (x) w feature entries
            return correction + self.map.w0.T.ravel()
        return correction + self.theta0_vector


def _resolve_theta0(fmap, theta0) -> tuple[str, np.ndarray | None]:
    if isinstance(theta0, str):
        if theta0 not in ("zero", "init"):
            raise ValueError(f"unknown theta0 policy {theta0!r}")
        if theta0 == "init" and fmap.kind != "ntk":
            raise ValueError("the 'init' policy applies to tangent maps")
        return theta0, None
    vec = np.asarray(theta0, dtype=float)
    if vec.shape != (fmap.n_params,):
        raise ValueError(f"theta0 vector must have length {fmap.n_params}")
    return "vector", vec


def fit_min_norm(fmap, dataset: LabeledDataset, theta0="zero") -> TrainedModel:
    """Interpolating fit closest to the initialization in parameter norm."""
    policy, vec = _resolve_theta0(fmap, theta0)
    prepared = fmap.prepare(dataset.z)
    kernel = prepared.gram()
    try:
        cache = KernelSolveCache.factor(kernel, p=fmap.n_params)
    except SingularGram as exc:
        raise SingularKernel(str(exc)) from exc

    if policy == "zero":
        f0 = np.zeros(dataset.n)
    elif policy == "init":
        f0 = fmap.init_outputs(dataset.z)
    else:
        f0 = fmap.feature_matrix(dataset.z) @ vec

    targets = np.asarray(dataset.g, dtype=float)
    rhs = targets - (f0[:, None] if targets.ndim == 2 else f0)
    coefs = cache.solve(rhs)

    residuals = kernel @ coefs - rhs
    report = FitReport(
        residual_norm=float(np.linalg.norm(residuals)),
        max_residual=float(np.max(np.abs(residuals))) if residuals.size else 0.0,
        min_eig=cache.min_eig,
        max_eig=cache.max_eig,
        condition=cache.condition,
        theta0_policy=policy,
    )
    return TrainedModel(
        map=fmap,
        prepared=prepared,
        targets=targets,
        dual_coefs=coefs,
        f0_train=f0,
        theta0_policy=policy,
        theta0_vector=vec,
        cache=cache,
        report=report,
    )


def _empty_model(fmap, dataset: LabeledDataset, policy: str, vec) -> TrainedModel:
    prepared = fmap.prepare(dataset.z.reshape(0, dataset.d))
    targets = np.asarray(dataset.g, dtype=float)[:0]
    report = FitReport(0.0, 0.0, 0.0, 0.0, 1.0, policy)
    return TrainedModel(
        map=fmap,
        prepared=prepared,
        targets=targets,
        dual_coefs=np.zeros(0) if targets.ndim == 1 else np.zeros((0, targets.shape[1])),
        f0_train=np.zeros(0),
        theta0_policy=policy,
        theta0_vector=vec,
        cache=None,
        report=report,
    )


def fit_leave_one_out(fmap, dataset: LabeledDataset, i: int, theta0="zero") -> TrainedModel:
    """Min-norm fit on the dataset with row i removed.

    With a single-row dataset the result is the pure initialization model.
    """
    if not 0 <= i < dataset.n:
        raise IndexError(f"row {i} out of range for n={dataset.n}")
    reduced = dataset.drop_row(i)
    if reduced.n == 0:
        policy, vec = _resolve_theta0(fmap, theta0)
        return _empty_model(fmap, reduced, policy, vec)
    return fit_min_norm(fmap, reduced, theta0=theta0)


def stability_eval(full: TrainedModel, loo: TrainedModel, z: np.ndarray):
    """Change in the prediction at z caused by the extra training sample."""
    if full.map is not loo.map:
        raise MapMismatch("models were fitted on different feature map instances")
    if full.theta0_policy != loo.theta0_policy:
        raise MapMismatch("models use different initialization policies")
    return full.predict(z) - loo.predict(z)


def _readout_accuracy(outputs: np.ndarray, labels: np.ndarray) -> float:
    if labels.ndim == 2:
        predicted = np.argmax(outputs, axis=1)
        truth = np.argmax(labels, axis=1)
        return float(np.mean(predicted == truth))
    predicted = np.where(outputs >= 0.0, 1.0, -1.0)
    return float(np.mean(predicted == labels))


def generalization_error(model: TrainedModel, test: LabeledDataset) -> EvalReport:
    """Mean squared residual on an independent test draw, with its standard
    error and the readout accuracy (sign for +-1 labels, argmax for one-hot).
    """
    outputs = model.predict_many(test.z)
    labels = np.asarray(test.g, dtype=float)
    sq = (outputs - labels) ** 2
    if sq.ndim == 2:
        sq = sq.sum(axis=1)
    error = float(np.mean(sq))
    std_error = float(np.std(sq, ddof=1) / np.sqrt(test.n)) if test.n > 1 else 0.0
    return EvalReport(
        error=error,
        std_error=std_error,
        accuracy=_readout_accuracy(outputs, labels),
        n_test=test.n,
    )
