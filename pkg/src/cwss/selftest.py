"""Release-gate self checks: fast dual-implementation and algebra audits."""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass

import numpy as np

from .correlate import (
    build_link_matrix,
    estimate_cav,
    link_matrix_entrywise,
    sensing_dictionary,
)
from .model import default_paper_plan, generate_scene, synthesize_frames
from .sampling import compress_frames, make_subsampling_matrix
from .solve import SolverConfig, l0_oracle, solve_lasso_cwss
from .tvops import build_tv_operator, total_variation_operator_norm, total_variation_sum, vec_columns


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _check_link_matrix_oracle(rng, fault: str | None) -> tuple[bool, str]:
    for _ in range(20):
        n = int(rng.integers(2, 17))
        m = int(rng.integers(1, n + 1))
        phi = make_subsampling_matrix(m, n, int(rng.integers(0, 2**31)))
        a_blocks = build_link_matrix(phi).a
        a_entry = link_matrix_entrywise(phi)
        if fault == "link":
            a_entry = a_entry.copy()
            a_entry[m, 0] += 1.0
        if not np.array_equal(a_blocks, a_entry):
            return False, f"mismatch at M={m}, N={n}"
    return True, "20 instances exact"


def _check_tv_equivalence(rng, fault: str | None) -> tuple[bool, str]:
    for n2, t in ((8, 2), (16, 4), (6, 3)):
        v = build_tv_operator(n2, t)
        if fault == "tv":
            v.v.data[3] = -v.v.data[3]
        for _ in range(20):
            # dyadic values keep both summation orders exact in float64
            p = np.zeros((n2, t))
            p[1 : n2 - 1, : t - 1] = rng.integers(0, 64, size=(n2 - 2, t - 1)) / 16.0
            lhs = total_variation_operator_norm(v, vec_columns(p))
            rhs = total_variation_sum(p)
            if lhs != rhs:
                return False, f"operator {lhs} != sum {rhs} at (n2={n2}, t={t})"
        if total_variation_operator_norm(v, np.zeros(n2 * t)) != 0.0:
            return False, "zero input maps to nonzero"
    return True, "60 interior-supported instances exact"


def l0_lasso_agreement(n_instances: int, seed: int, n: int = 8, m: int = 6) -> float:
    """Fraction of noiseless 2-sparse instances where the L1 program's support
    matches the exhaustive search (dictionary columns = 2N = 16)."""
    rng = np.random.default_rng(seed)
    agree = 0
    config = SolverConfig(primal_tol=1e-9, dual_tol=1e-9, max_iter=20000)
    for _ in range(n_instances):
        phi = make_subsampling_matrix(m, n, int(rng.integers(0, 2**31)))
        bundle = sensing_dictionary(phi)
        two_n = 2 * n
        support = rng.choice(two_n, size=2, replace=False)
        p0 = np.zeros(two_n)
        p0[support] = rng.uniform(0.5, 1.5, size=2)
        b = bundle.d @ p0
        tol = 1e-8 * np.linalg.norm(b)
        res = solve_lasso_cwss(bundle, b, config, mu_factor=1e-6)
        lasso_support = set(np.flatnonzero(np.abs(res.p_hat) > 1e-3 * np.abs(res.p_hat).max()))
        oracle = l0_oracle(bundle.d, b, max_support=2, tol=tol)
        if oracle.found and lasso_support == set(oracle.support):
            agree += 1
    return agree / n_instances


def _check_l0_agreement(rng, fault: str | None) -> tuple[bool, str]:
    frac = l0_lasso_agreement(25, seed=int(rng.integers(0, 2**31)))
    return frac >= 0.9, f"agreement {frac:.0%} on 25 instances"


def _check_adjoints(rng, fault: str | None) -> tuple[bool, str]:
    for _ in range(10):
        n = int(rng.integers(2, 9))
        m = int(rng.integers(1, n + 1))
        t = int(rng.integers(1, 4))
        phi = make_subsampling_matrix(m, n, int(rng.integers(0, 2**31)))
        op = sensing_dictionary(phi).stacked(t)
        x = rng.standard_normal(2 * n * t)
        y = rng.standard_normal(2 * m * t) + 1j * rng.standard_normal(2 * m * t)
        lhs = np.vdot(y, op.matvec(x))
        rhs = np.vdot(op.rmatvec(y), x)
        if abs(lhs - rhs) > 1e-10 * max(1.0, abs(lhs)):
            return False, f"adjoint defect {abs(lhs - rhs):.2e}"
        dense = op.to_dense()
        if np.abs(dense @ x - op.matvec(x)).max() > 1e-12:
            return False, "dense form disagrees with the block action"
    return True, "10 stacked operators pass"


def _check_outer_product_identity(rng, fault: str | None) -> tuple[bool, str]:
    plan = default_paper_plan(32)
    for _ in range(5):
        scene = generate_scene(plan, 4, 15.0, int(rng.integers(0, 2**31)))
        frames = synthesize_frames(scene, 40, int(rng.integers(0, 2**31)))
        phi = make_subsampling_matrix(int(rng.integers(4, 20)), 32, int(rng.integers(0, 2**31)))
        x = np.asarray([f.samples for f in frames])
        y = np.asarray([c.samples for c in compress_frames(phi, frames)])
        r_x = np.einsum("fi,fj->ij", x, x.conj()) / len(frames)
        r_y = np.einsum("fi,fj->ij", y, y.conj()) / len(frames)
        dense = phi.dense()
        lhs = dense @ r_x @ dense.conj().T
        rel = np.abs(lhs - r_y).max() / np.abs(r_y).max()
        if rel > 1e-12:
            return False, f"relative defect {rel:.2e}"
    return True, "5 instances at machine precision"


def _check_cav_estimator(rng, fault: str | None) -> tuple[bool, str]:
    plan = default_paper_plan(32)
    scene = generate_scene(plan, 3, float("inf"), int(rng.integers(0, 2**31)))
    frames = synthesize_frames(scene, 600, int(rng.integers(0, 2**31)))
    phi = make_subsampling_matrix(16, 32, int(rng.integers(0, 2**31)))
    from .correlate import analytic_cav

    est = estimate_cav(phi, compress_frames(phi, frames)).values
    ref = analytic_cav(scene, phi).values
    rel = np.linalg.norm(est - ref) / np.linalg.norm(ref)
    return rel < 0.15, f"relative error {rel:.3f} with 600 frames"


CHECKS = (
    ("link-matrix dual implementation", _check_link_matrix_oracle),
    ("TV operator vs neighbor sum", _check_tv_equivalence),
    ("L1 vs exhaustive L0 support", _check_l0_agreement),
    ("stacked-operator adjoint", _check_adjoints),
    ("outer-product sampling identity", _check_outer_product_identity),
    ("compressive autocorrelation estimator", _check_cav_estimator),
)


def run_selftest(seed: int = 0, inject_fault: str | None = None) -> list[CheckResult]:
    """Run every gate check; ``inject_fault`` corrupts one builder to prove
    the gate notices ("tv" or "link")."""
    results = []
    for name, fn in CHECKS:
        rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        t0 = time.perf_counter()
        try:
            passed, detail = fn(rng, inject_fault)
        except Exception as exc:  # a crashed check is a failed check
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CheckResult(name=name, passed=passed, detail=detail, seconds=time.perf_counter() - t0))
    return results
