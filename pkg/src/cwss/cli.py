"""Command-line harness: sense, montecarlo, bounds, selftest, bench.

Exit codes: 0 ok, 1 selftest/property failure, 2 configuration error,
3 solver non-convergence in sense mode.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import backend
from ._version import __version__
from .experiment import ExperimentConfig, run_montecarlo, run_sense
from .solve import SolverConfig, measurement_bounds


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, help="JSON file with an ExperimentConfig")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--n", type=int, help="Nyquist frame length N (power of two)")
    parser.add_argument("--t", type=int, dest="t_periods", help="sensing periods T")
    parser.add_argument("--n-active", type=int)
    parser.add_argument("--snr-db", type=float)
    parser.add_argument("--mu-factor", type=float)
    parser.add_argument("--method", choices=("lasso", "tvm", "both"))
    parser.add_argument("--frames-per-period", type=int)
    parser.add_argument("--designated-subband", type=int)
    parser.add_argument("--cav-estimator", choices=("gap", "stream"))
    parser.add_argument("--noise-off", action="store_true", default=None)
    parser.add_argument("--exact-autocorr", action="store_true", default=None)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--plan-file", type=str)
    parser.add_argument("--max-iter", type=int, help="solver iteration cap")
    parser.add_argument("--tol", type=float, help="solver primal/dual tolerance")
    parser.add_argument("--out-dir", type=Path, default=Path("out"))


_CONFIG_KEYS = (
    "seed",
    "n",
    "t_periods",
    "n_active",
    "snr_db",
    "mu_factor",
    "method",
    "frames_per_period",
    "designated_subband",
    "cav_estimator",
    "noise_off",
    "exact_autocorr",
    "plan_file",
)


def _build_config(args) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.from_json_dict(json.loads(args.config.read_text()))
    else:
        config = ExperimentConfig()
    overrides = {}
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "rate", None) is not None:
        overrides["rate"] = args.rate
    if getattr(args, "rates", None) is not None:
        overrides["subsample_rates"] = tuple(float(r) for r in args.rates.split(","))
    if getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    solver = config.solver
    if getattr(args, "max_iter", None) is not None:
        solver = replace(solver, max_iter=args.max_iter)
    if getattr(args, "tol", None) is not None:
        solver = replace(solver, primal_tol=args.tol, dual_tol=args.tol)
    if solver is not config.solver:
        overrides["solver"] = solver
    return replace(config, **overrides) if overrides else config


def _cmd_sense(args) -> int:
    config = _build_config(args)
    result = run_sense(config, args.out_dir)
    for method, info in sorted(result["methods"].items()):
        status = "converged" if info["converged"] else "DID NOT CONVERGE"
        print(f"{method}: {status} in {info['iterations']} iterations, psd error {info['psd_error']:.4f}")
    print(f"outputs in {args.out_dir}")
    return 0 if result["all_converged"] else 3


def _cmd_montecarlo(args) -> int:
    config = _build_config(args)

    def progress(done, total):
        print(f"rate {done}/{total} complete", flush=True)

    try:
        run_montecarlo(config, args.out_dir, workers=args.workers or 1, progress=progress)
    except KeyboardInterrupt:
        print("interrupted; partial montecarlo.csv kept", file=sys.stderr)
        return 130
    print(f"report in {args.out_dir}")
    return 0


def _cmd_bounds(args) -> int:
    report = measurement_bounds(n=args.n, s=args.s, k=args.k, delta=args.delta, t=args.t, c=args.c)
    text = json.dumps(report.to_json_dict(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest(seed=args.seed if args.seed is not None else 0, inject_fault=args.inject_fault)
    width = max(len(r.name) for r in results)
    all_passed = True
    total = 0.0
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        all_passed &= r.passed
        total += r.seconds
        print(f"{r.name:<{width}}  {mark}  {r.detail} ({r.seconds:.2f}s)")
    print(f"total {total:.1f}s")
    if total > 60:
        print("warning: selftest exceeded its 60 s budget", file=sys.stderr)
    return 0 if all_passed else 1


def _cmd_bench(args) -> int:
    from .bench import format_bench, run_bench

    if len(backend.available_backends()) == 1:
        print("compiled kernel unavailable; benchmarking the NumPy fallback only")
    rows = run_bench(n=args.n or 128, rate=args.rate or 0.5, t_periods=args.t_periods or 2)
    print(format_bench(rows))
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cwss", description=__doc__)
    parser.add_argument("--version", action="version", version=f"cwss {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sense", help="single end-to-end sensing run")
    _add_common(p)
    p.add_argument("--rate", type=float, help="sub-sampling rate M/N (default 0.25)")
    p.set_defaults(fn=_cmd_sense)

    p = sub.add_parser("montecarlo", help="paired Monte Carlo sweep over rates")
    _add_common(p)
    p.add_argument("--rates", type=str, help="comma-separated sub-sampling rates")
    p.add_argument("--trials", type=int)
    p.set_defaults(fn=_cmd_montecarlo)

    p = sub.add_parser("bounds", help="measurement-count bounds report")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--out", type=str)
    p.set_defaults(fn=_cmd_bounds)

    p = sub.add_parser("selftest", help="run the release-gate checks")
    p.add_argument("--seed", type=int)
    p.add_argument("--inject-fault", choices=("tv", "link"), help="corrupt one builder to exercise the gate")
    p.set_defaults(fn=_cmd_selftest)

    p = sub.add_parser("bench", help="compare the compiled kernel with the fallback")
    p.add_argument("--n", type=int)
    p.add_argument("--rate", type=float)
    p.add_argument("--t", type=int, dest="t_periods")
    p.set_defaults(fn=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
