"""Command-line entry point.

Subcommands: fit, attack, gamma, hermite, sweep, verify, gen-data, eigs.
Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import data as datamod
from . import verify as verifymod
from .alignment import compare_gamma_theory, estimate_gamma
from .attack import build_query_batch, run_attack
from .data import MaskStrategy, generate_synthetic, sample_teacher
from .errors import ConfigError, ReconstabError
from .featuremaps import sample_ntk_map, sample_rf_map
from .harness import WORKERS_ENV, parse_config, run_sweep, write_rows
from .hermite import activation_names, get_activation, hermite_coefficients
from .linops import min_eigenvalue
from .seeding import ROLE_DATA, ROLE_MAP, ROLE_MASK, ROLE_TEACHER, ROLE_TEST, derive_seed
from .trainer import fit_min_norm, generalization_error


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _add_instance_args(parser, model_kind=True):
    if model_kind:
        parser.add_argument("--model", choices=["rf", "ntk"], default="rf")
    parser.add_argument("--k", type=int, default=2000)
    parser.add_argument("--dx", type=int, default=100)
    parser.add_argument("--dy", type=int, default=100)
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--activation", default="h1+h2",
                        help=f"one of: {', '.join(activation_names())} "
                        "(for ntk this names the activation derivative)")
    parser.add_argument("--seed", type=int, default=0)


def _build_instance(args):
    d = args.dx + args.dy
    activation = get_activation(args.activation)
    teacher = sample_teacher(args.dx, derive_seed(args.seed, [ROLE_TEACHER]))
    dataset = generate_synthetic(
        args.n, args.dx, args.dy, teacher, derive_seed(args.seed, [ROLE_DATA])
    )
    if args.model == "rf":
        fmap = sample_rf_map(args.k, d, activation, derive_seed(args.seed, [ROLE_MAP]))
        theta0 = "zero"
    else:
        fmap = sample_ntk_map(args.k, d, activation, derive_seed(args.seed, [ROLE_MAP]))
        theta0 = "init"
    return fmap, dataset, teacher, theta0


def _cmd_fit(args) -> int:
    fmap, dataset, teacher, theta0 = _build_instance(args)
    model = fit_min_norm(fmap, dataset, theta0=theta0)
    test = generate_synthetic(
        args.test_size, args.dx, args.dy, teacher, derive_seed(args.seed, [ROLE_TEST])
    )
    evaluation = generalization_error(model, test)
    scale = args.k if args.model == "rf" else args.k * (args.dx + args.dy)
    print(
        f"n={dataset.n} alpha={dataset.alpha:.4g} max_residual={model.report.max_residual:.3e} "
        f"lambda_min_over_scale={model.report.min_eig / scale:.4g} "
        f"condition={model.report.condition:.3e} "
        f"test_error={evaluation.error:.4g} test_acc={evaluation.accuracy:.4f}"
    )
    return 0


def _cmd_attack(args) -> int:
    fmap, dataset, teacher, theta0 = _build_instance(args)
    model = fit_min_norm(fmap, dataset, theta0=theta0)
    test = generate_synthetic(
        args.test_size, args.dx, args.dy, teacher, derive_seed(args.seed, [ROLE_TEST])
    )
    evaluation = generalization_error(model, test)
    strategy = MaskStrategy(args.mask, seed=derive_seed(args.seed, [ROLE_MASK]))
    report = run_attack(
        model, build_query_batch(dataset, strategy), dataset.g, args.readout
    )
    print(
        f"n={dataset.n} alpha={dataset.alpha:.4g} activation={args.activation} "
        f"readout={args.readout} test_acc={evaluation.accuracy:.4f} "
        f"attack_acc={report.attack_accuracy:.4f}"
    )
    return 0


def _cmd_gamma(args) -> int:
    est = estimate_gamma(
        args.model, get_activation(args.activation),
        k=args.k, n=args.n, d_x=args.dx, d_y=args.dy,
        trials=args.trials, master_seed=args.seed,
    )
    verdict = compare_gamma_theory(est, tolerance=args.tolerance)
    reference = (
        f"{verdict.lower:.6g}" if verdict.closed_form
        else f"[{verdict.lower:.6g}, {verdict.upper:.6g}]"
    )
    print(
        f"model={est.kind} alpha={est.alpha:.4g} activation={est.activation} "
        f"trials={est.trials} mean={est.mean:.6g} std={est.std:.6g} "
        f"ratio_of_means={est.ratio_of_means:.6g} reference={reference} "
        f"tail_bound={est.tail_bound:.3g} truncation={est.truncation} "
        f"verdict={verdict.label}"
    )
    return 0


def _cmd_hermite(args) -> int:
    spec = hermite_coefficients(get_activation(args.activation), order=args.order)
    print(f"# activation={args.activation} truncation={spec.truncation} "
          f"nodes={spec.nodes} tail_power={spec.tail_power:.3e}")
    print("l mu_l")
    for l, mu in enumerate(spec.coefficients):
        print(f"{l} {float(mu)!r}")
    return 0


def _cmd_sweep(args) -> int:
    config = parse_config(args.config)
    workers = args.workers if args.workers else _default_workers()
    rows = run_sweep(config, workers=workers)
    out = args.out or config.output
    if out:
        with open(out, "w", newline="") as f:
            write_rows(rows, f)
        print(f"wrote {len(rows)} rows to {out}", file=sys.stderr)
    else:
        write_rows(rows, sys.stdout)
    return 0


def _cmd_verify(args) -> int:
    report = verifymod.run_verify(args.level)
    for check in report.checks:
        print(f"{check.label} {check.name}: {check.detail}")
    return 0 if report.ok else 1


def _cmd_gen_data(args) -> int:
    teacher = sample_teacher(args.dx, derive_seed(args.seed, [ROLE_TEACHER]))
    dataset = generate_synthetic(
        args.n, args.dx, args.dy, teacher, derive_seed(args.seed, [ROLE_DATA])
    )
    datamod.save_matrix(args.out + ".z.glma", dataset.z)
    datamod.save_matrix(args.out + ".g.glma", dataset.g.reshape(-1, 1))
    datamod.write_metadata(
        args.out + ".meta",
        {
            "n": dataset.n,
            "d_x": dataset.d_x,
            "d_y": dataset.d_y,
            "seed": args.seed,
            "label_mode": dataset.label_mode,
            "frame_width": 0,
        },
    )
    print(f"wrote {args.out}.z.glma, {args.out}.g.glma, {args.out}.meta", file=sys.stderr)
    return 0


def _cmd_eigs(args) -> int:
    fmap, dataset, _, _ = _build_instance(args)
    kernel = fmap.prepare(dataset.z).gram()
    scale = args.k if args.model == "rf" else args.k * (args.dx + args.dy)
    lam = min_eigenvalue(kernel)
    print(
        f"model={args.model} n={dataset.n} d={dataset.d} k={args.k} "
        f"lambda_min={lam:.6g} lambda_min_over_scale={lam / scale:.6g}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reconstab",
        description="Min-norm interpolation, feature alignment, and masked-query attacks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit one instance and evaluate it")
    _add_instance_args(p_fit)
    p_fit.add_argument("--test-size", type=int, default=1000)
    p_fit.set_defaults(fn=_cmd_fit)

    p_attack = sub.add_parser("attack", help="run the masked-query attack")
    _add_instance_args(p_attack)
    p_attack.add_argument("--test-size", type=int, default=1000)
    p_attack.add_argument("--mask", choices=["resample", "zero"], default="resample")
    p_attack.add_argument("--readout", choices=["sign", "argmax"], default="sign")
    p_attack.set_defaults(fn=_cmd_attack)

    p_gamma = sub.add_parser("gamma", help="Monte-Carlo alignment vs theory")
    _add_instance_args(p_gamma)
    p_gamma.add_argument("--trials", type=int, default=50)
    p_gamma.add_argument("--tolerance", type=float, default=0.05)
    p_gamma.set_defaults(fn=_cmd_gamma)

    p_hermite = sub.add_parser("hermite", help="print an activation's coefficients")
    p_hermite.add_argument("--activation", default="relu")
    p_hermite.add_argument("--order", type=int, default=40)
    p_hermite.set_defaults(fn=_cmd_hermite)

    p_sweep = sub.add_parser("sweep", help="run a configured (N, trial) sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default="")
    p_sweep.add_argument("--workers", type=int, default=0,
                         help=f"0 means use ${WORKERS_ENV} (default 1)")
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the identity/theory suites")
    p_verify.add_argument("--level", choices=["quick", "full"], default="quick")
    p_verify.set_defaults(fn=_cmd_verify)

    p_gen = sub.add_parser("gen-data", help="write a synthetic dataset to disk")
    p_gen.add_argument("--n", type=int, default=200)
    p_gen.add_argument("--dx", type=int, default=100)
    p_gen.add_argument("--dy", type=int, default=100)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(fn=_cmd_gen_data)

    p_eigs = sub.add_parser("eigs", help="smallest kernel eigenvalue of an instance")
    _add_instance_args(p_eigs)
    p_eigs.set_defaults(fn=_cmd_eigs)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ReconstabError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
