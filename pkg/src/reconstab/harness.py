"""Seeded sweep execution over (N, trials) grids with deterministic CSV output.

Every row is a pure function of (config, master seed): data, map, test draw,
mask, and alignment trials all get independent derived seeds. Rows may be
computed concurrently but are always emitted in (N, trial) order, so the CSV
bytes do not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

from .alignment import estimate_gamma_on_instance
from .attack import build_query_batch, run_attack
from .data import MaskStrategy, generate_synthetic, sample_teacher
from .errors import ConfigError, ReconstabError
from .featuremaps import sample_ntk_map, sample_rf_map
from .hermite import get_activation
from .seeding import (
    ROLE_DATA,
    ROLE_GAMMA,
    ROLE_MAP,
    ROLE_MASK,
    ROLE_TEACHER,
    ROLE_TEST,
    derive_seed,
)
from .trainer import fit_min_norm, generalization_error

WORKERS_ENV = "RECONSTAB_WORKERS"

_CONFIG_FIELDS = {
    "model": str,
    "k": int,
    "d_x": int,
    "d_y": int,
    "activation": str,
    "n_grid": list,
    "trials": int,
    "mask": str,
    "readout": str,
    "master_seed": int,
    "theta0": str,
    "test_size": int,
    "gamma_trials": int,
    "output": str,
}
_REQUIRED = ("model", "k", "d_x", "d_y", "activation", "n_grid", "trials", "master_seed")


@dataclass
class ExperimentConfig:
    """One sweep: a model family crossed with an N grid and repeated trials.

    For tangent-kernel models the activation name refers to the derivative of
    the network activation (that is what the feature map applies).
    """

    model: str
    k: int
    d_x: int
    d_y: int
    activation: str
    n_grid: tuple[int, ...]
    trials: int
    mask: str = "resample"
    readout: str = "sign"
    master_seed: int = 0
    theta0: str = ""
    test_size: int = 1000
    gamma_trials: int = 20
    output: str = ""

    def __post_init__(self) -> None:
        if self.model not in ("rf", "ntk"):
            raise ConfigError(f"model must be 'rf' or 'ntk', got {self.model!r}")
        for name in ("k", "d_x", "d_y", "trials", "test_size", "gamma_trials"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        grid = tuple(int(n) for n in self.n_grid)
        if any(n < 1 for n in grid):
            raise ConfigError("n_grid entries must be >= 1")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("n_grid must be strictly increasing")
        self.n_grid = grid
        if self.mask not in ("resample", "zero"):
            raise ConfigError(f"mask must be 'resample' or 'zero', got {self.mask!r}")
        if self.readout not in ("sign", "argmax"):
            raise ConfigError(f"readout must be 'sign' or 'argmax', got {self.readout!r}")
        if not self.theta0:
            self.theta0 = "zero" if self.model == "rf" else "init"
        if self.theta0 not in ("zero", "init"):
            raise ConfigError(f"theta0 must be 'zero' or 'init', got {self.theta0!r}")
        if self.theta0 == "init" and self.model == "rf":
            raise ConfigError("theta0='init' applies to ntk models only")
        get_activation(self.activation)
        n_max = max(grid) if grid else 0
        if self.model == "rf" and self.k < n_max:
            warnings.warn(
                f"k={self.k} below the largest N={n_max}; the kernel may be singular",
                stacklevel=2,
            )
        if self.model == "ntk" and self.k * self.d < n_max:
            warnings.warn(
                f"k*d={self.k * self.d} below the largest N={n_max}; "
                "the kernel may be singular",
                stacklevel=2,
            )

    @property
    def d(self) -> int:
        return self.d_x + self.d_y

    @property
    def alpha(self) -> float:
        return self.d_y / self.d


def parse_config(source) -> ExperimentConfig:
    """Build a config from a JSON document (path, file object, or dict).

    Unknown keys are a hard error: a misspelled theory-sensitive parameter
    must not silently fall back to a default.
    """
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source) as f:
            doc = json.load(f)
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(doc) - set(_CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = [key for key in _REQUIRED if key not in doc]
    if missing:
        raise ConfigError(f"missing required config keys: {missing}")
    try:
        return ExperimentConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class ResultRow:
    model: str
    n: int
    alpha: float
    activation: str
    trial: int
    seed: int
    test_acc: float | None
    attack_acc: float | None
    gamma_mean: float | None
    gamma_std: float | None
    lambda_min_over_scale: float | None
    runtime_ms: int
    error: str = ""


RESULT_COLUMNS = [f.name for f in fields(ResultRow)]


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_rows(rows, stream) -> None:
    """RFC-4180 CSV with the exact ResultRow header."""
    writer = csv.writer(stream, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(RESULT_COLUMNS)
    for row in rows:
        writer.writerow([_format_cell(getattr(row, name)) for name in RESULT_COLUMNS])


def rows_to_csv_bytes(rows) -> bytes:
    buf = io.StringIO()
    write_rows(rows, buf)
    return buf.getvalue().encode()


def _run_point(config: ExperimentConfig, n_idx: int, trial: int) -> ResultRow:
    master = config.master_seed
    teacher = sample_teacher(config.d_x, derive_seed(master, [ROLE_TEACHER]))
    n = config.n_grid[n_idx]
    data_seed = derive_seed(master, [n_idx, trial, ROLE_DATA])
    map_seed = derive_seed(master, [n_idx, trial, ROLE_MAP])
    test_seed = derive_seed(master, [n_idx, trial, ROLE_TEST])
    mask_seed = derive_seed(master, [n_idx, trial, ROLE_MASK])
    gamma_seed = derive_seed(master, [n_idx, trial, ROLE_GAMMA])

    started = time.perf_counter()
    activation = get_activation(config.activation)
    scale = config.k if config.model == "rf" else config.k * config.d
    try:
        dataset = generate_synthetic(n, config.d_x, config.d_y, teacher, data_seed)
        if config.model == "rf":
            fmap = sample_rf_map(config.k, config.d, activation, map_seed)
        else:
            fmap = sample_ntk_map(config.k, config.d, activation, map_seed)
        model = fit_min_norm(fmap, dataset, theta0=config.theta0)
        test = generate_synthetic(
            config.test_size, config.d_x, config.d_y, teacher, test_seed
        )
        evaluation = generalization_error(model, test)
        batch = build_query_batch(dataset, MaskStrategy(config.mask, seed=mask_seed))
        attack = run_attack(model, batch, dataset.g, config.readout)
        gamma_mean, gamma_std = estimate_gamma_on_instance(
            fmap, dataset.z[1:], config.d_x, config.gamma_trials, gamma_seed
        )
    except ReconstabError as exc:
        return ResultRow(
            model=config.model,
            n=n,
            alpha=config.alpha,
            activation=config.activation,
            trial=trial,
            seed=data_seed,
            test_acc=None,
            attack_acc=None,
            gamma_mean=None,
            gamma_std=None,
            lambda_min_over_scale=None,
            runtime_ms=0,
            error=f"{type(exc).__name__}: {exc}",
        )
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    print(
        f"n={n} trial={trial} done in {elapsed_ms:.0f} ms",
        file=sys.stderr,
    )
    # wall time is reported on stderr only; the CSV must be a pure function
    # of the config bytes, so the runtime column carries a fixed value
    return ResultRow(
        model=config.model,
        n=n,
        alpha=config.alpha,
        activation=config.activation,
        trial=trial,
        seed=data_seed,
        test_acc=evaluation.accuracy,
        attack_acc=attack.attack_accuracy,
        gamma_mean=gamma_mean,
        gamma_std=gamma_std,
        lambda_min_over_scale=model.report.min_eig / scale,
        runtime_ms=0,
        error="",
    )


def run_sweep(config: ExperimentConfig, workers: int = 1) -> list[ResultRow]:
    """All (N, trial) rows in deterministic order; per-row errors are recorded
    in the error column and never abort the sweep.
    """
    points = [
        (n_idx, trial)
        for n_idx in range(len(config.n_grid))
        for trial in range(config.trials)
    ]
    if workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda p: _run_point(config, *p), points))
    else:
        rows = [_run_point(config, *point) for point in points]
    return [row for _, row in sorted(zip(points, rows), key=lambda pr: pr[0])]
