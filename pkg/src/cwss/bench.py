"""Benchmark the compiled ADMM kernel against the NumPy fallback."""

from __future__ import annotations

import time

import numpy as np

from . import backend
from .correlate import analytic_cav, sensing_dictionary
from .model import default_paper_plan, generate_scene
from .sampling import make_subsampling_matrix, rate_to_m
from .solve import SolverConfig, solve_lasso_cwss, solve_tvm_cwss
from .tvops import build_tv_operator


def _time(fn, repeats: int = 3) -> tuple[float, object]:
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run_bench(n: int = 128, rate: float = 0.5, t_periods: int = 2, seed: int = 0) -> list[dict]:
    """Solve one representative instance per program on every backend."""
    plan = default_paper_plan(n)
    scene = generate_scene(plan, 5, 10.0, seed)
    phi = make_subsampling_matrix(rate_to_m(rate, n), n, seed + 1)
    bundle = sensing_dictionary(phi)
    r = analytic_cav(scene, phi, include_noise=True).values
    r_stack = np.tile(r[:, None], (1, t_periods))
    v = build_tv_operator(2 * n, t_periods)
    config = SolverConfig(primal_tol=1e-5, dual_tol=1e-5)

    rows = []
    for name in backend.available_backends():
        secs, res = _time(lambda: solve_lasso_cwss(bundle, r, config, backend=name))
        rows.append({"backend": name, "program": "lasso", "seconds": secs, "iterations": res.iterations})
        secs, res = _time(lambda: solve_tvm_cwss(bundle, v, r_stack, config, backend=name))
        rows.append({"backend": name, "program": "tvm", "seconds": secs, "iterations": res.iterations})
    return rows


def format_bench(rows: list[dict]) -> str:
    lines = [f"{'backend':<10} {'program':<8} {'iterations':>10} {'seconds':>10}"]
    for r in rows:
        lines.append(f"{r['backend']:<10} {r['program']:<8} {r['iterations']:>10} {r['seconds']:>10.4f}")
    by_prog = {}
    for r in rows:
        by_prog.setdefault(r["program"], {})[r["backend"]] = r["seconds"]
    for prog, d in sorted(by_prog.items()):
        if "cython" in d and "python" in d and d["cython"] > 0:
            lines.append(f"{prog}: compiled kernel speedup {d['python'] / d['cython']:.2f}x")
    return "\n".join(lines)
