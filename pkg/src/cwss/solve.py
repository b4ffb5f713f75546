"""Constrained-L1 recovery programs, the exhaustive L0 oracle, measurement
bounds, and an empirical restricted-isometry probe.

Both recovery programs share one operator-splitting core:

    min ||W p||_1   s.t.  ||b - B p||_2 <= mu

with W = I (plain sparse recovery) or W = V (total-variation weighting), and
B the (possibly period-stacked) complex dictionary lifted to an equivalent
real system.  The quadratic subproblem reuses one Cholesky factor; the
penalty parameter rescales only the dual variables, so residual balancing is
free.  A converged solve is certified against its ball constraint and, if the
raw iterate sits slightly outside, is pulled back with a minimum-norm
correction.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

from . import backend as _backend
from .correlate import AutocorrVector, DictionaryBundle, StackedDictionary
from .tvops import TvOperator, unvec_columns


@dataclass(frozen=True)
class SolverConfig:
    """Tunables for the operator-splitting core.

    ``mu`` is the residual-ball radius; leave as None to let the program
    wrappers derive it from the measurement norm.
    """

    mu: float | None = None
    max_iter: int = 10000
    primal_tol: float = 1e-6
    dual_tol: float = 1e-6
    penalty_rho: float = 1.0
    nonneg_constraint: bool = False
    over_relax: float = 1.7
    adaptive_rho: bool = True
    adapt_every: int = 10
    adapt_ratio: float = 5.0
    adapt_factor: float = 2.0
    abs_tol: float = 1e-12
    constraint_slack_tol: float = 1e-6

    def __post_init__(self):
        if self.mu is not None and self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.primal_tol <= 0 or self.dual_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.penalty_rho <= 0:
            raise ValueError("penalty_rho must be positive")
        if not 0.0 < self.over_relax < 2.0:
            raise ValueError("over_relax must be in (0, 2)")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SolverConfig":
        return cls(**json.loads(text))


@dataclass
class SolveResult:
    """Recovered PSD with the solver's convergence certificate."""

    p_hat: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float
    converged: bool
    constraint_residual: float = 0.0
    mu: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "p_hat": np.asarray(self.p_hat).tolist(),
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "objective": self.objective,
            "converged": self.converged,
            "constraint_residual": self.constraint_residual,
            "mu": self.mu,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def _real_lift(mat: np.ndarray) -> np.ndarray:
    mat = np.asarray(mat, dtype=complex)
    return np.vstack([mat.real, mat.imag])


def _lift_measurement(b: np.ndarray, t: int) -> np.ndarray:
    per = np.asarray(b, dtype=complex).reshape(t, -1)
    return np.concatenate([np.concatenate([row.real, row.imag]) for row in per])


def _as_w_matrix(w_op, n: int) -> sp.csr_matrix:
    if w_op is None or (isinstance(w_op, str) and w_op == "identity"):
        return sp.identity(n, format="csr")
    if isinstance(w_op, TvOperator):
        if w_op.n_vars != n:
            raise ValueError(f"TV operator sized for {w_op.n_vars} variables, problem has {n}")
        return w_op.v
    mat = sp.csr_matrix(w_op)
    if mat.shape[1] != n:
        raise ValueError(f"W has {mat.shape[1]} columns, problem has {n} variables")
    return mat


def _zero_result(n: int, mu: float, resid: float) -> SolveResult:
    return SolveResult(
        p_hat=np.zeros(n),
        iterations=0,
        primal_residual=0.0,
        dual_residual=0.0,
        objective=0.0,
        converged=True,
        constraint_residual=resid,
        mu=mu,
    )


def solve_constrained_l1(op_b, w_op, measurement, config: SolverConfig, backend: str | None = None) -> SolveResult:
    """Solve min ||W p||_1 s.t. ||b - B p||_2 <= mu.

    ``op_b`` is a complex matrix or a :class:`StackedDictionary`; complex
    systems are lifted to stacked real/imaginary parts so p stays real.
    Non-convergence within max_iter is reported, never raised.
    """
    if isinstance(op_b, StackedDictionary):
        d = op_b.d
        t = op_b.t
    else:
        d = np.asarray(op_b, dtype=complex)
        t = 1
    if config.mu is None:
        raise ValueError("config.mu must be set (program wrappers derive it from the data)")
    mu = float(config.mu)
    b = np.asarray(measurement, dtype=complex).reshape(-1)
    if b.size != t * d.shape[0]:
        raise ValueError(f"measurement length {b.size} != operator rows {t * d.shape[0]}")
    if not np.isfinite(b).all():
        raise ValueError("measurement must be finite")

    n = t * d.shape[1]
    d_lift = _real_lift(d)
    b_lift = _lift_measurement(b, t)

    # rows of the lifted dictionary that are identically zero contribute a
    # constant to the residual; fold them into the radius
    keep = np.linalg.norm(d_lift, axis=1) > 0.0
    keep_mask = np.tile(keep, t)
    const2 = float(np.sum(np.abs(b_lift[~keep_mask]) ** 2))
    d_kept = np.ascontiguousarray(d_lift[keep])
    b_kept = b_lift[keep_mask]
    if mu * mu < const2 and not math.isclose(mu * mu, const2, rel_tol=1e-12):
        # no p can reach the ball
        res = _zero_result(n, mu, math.sqrt(const2 + float(np.sum(np.abs(b_kept) ** 2))))
        res.converged = False
        return _finish(res, w_op, n, t, d.shape[1])
    mu_eff = math.sqrt(max(mu * mu - const2, 0.0))

    raw_norm = float(np.linalg.norm(b_kept))
    fro = float(np.linalg.norm(d_kept))
    if fro == 0.0:
        res = _zero_result(n, mu, math.sqrt(raw_norm**2 + const2))
        res.converged = raw_norm <= mu_eff
        return _finish(res, w_op, n, t, d.shape[1])
    if raw_norm == 0.0 or mu_eff >= raw_norm:
        # zero is feasible and has the minimum objective
        return _finish(_zero_result(n, mu, _constraint_residual(d_kept, t, np.zeros(n), b_kept, const2)), w_op, n, t, d.shape[1])

    w_base = _as_w_matrix(w_op, n)
    q_soft = w_base.shape[0]
    w_mat = sp.vstack([w_base, sp.identity(n, format="csr")], format="csr") if config.nonneg_constraint else w_base

    # balance the two quadratic blocks of the normal equations: scale the
    # constraint side so ||beta B||_F matches ||W||_F (pure reconditioning,
    # the problem is unchanged)
    w_fro = float(np.sqrt((w_mat.data**2).sum()))
    beta = w_fro / (math.sqrt(t) * fro)
    d_kept = beta * d_kept
    b_kept = beta * b_kept
    mu_eff = beta * mu_eff
    const2_s = beta * beta * const2
    scale = float(np.linalg.norm(b_kept))

    gram = d_kept.T @ d_kept
    g = (w_mat.T @ w_mat).toarray()
    npp = d.shape[1]
    for c in range(t):
        g[c * npp : (c + 1) * npp, c * npp : (c + 1) * npp] += gram
    chol_l = np.linalg.cholesky(g)

    loop = _backend.get_loop(backend)
    w_csr = w_mat.tocsr()
    p_norm, iters, r_pri, s_dual, loop_converged, _rho = loop(
        chol_l,
        d_kept,
        t,
        w_csr.data.astype(np.float64),
        w_csr.indices.astype(np.int32),
        w_csr.indptr.astype(np.int32),
        int(q_soft),
        b_kept / scale,
        mu_eff / scale,
        float(config.penalty_rho),
        float(config.over_relax),
        int(config.max_iter),
        float(config.primal_tol),
        float(config.dual_tol),
        float(config.abs_tol),
        bool(config.adaptive_rho),
        int(config.adapt_every),
        float(config.adapt_ratio),
        float(config.adapt_factor),
    )
    p_hat = scale * np.asarray(p_norm)

    # residuals below are in the beta-scaled space; divide out for reporting
    resid = _constraint_residual(d_kept, t, p_hat, b_kept, const2_s)
    slack = config.constraint_slack_tol
    mu_s = beta * mu
    # pull back onto the ball when the iterate sits beyond half the allowed
    # slack (least-squares consistency fix when mu = 0)
    if resid > mu_s * (1.0 + 0.5 * slack) + 0.5 * slack * scale * (mu == 0.0):
        p_hat = _ball_correction(d_kept, t, p_hat, b_kept, mu_eff)
        resid = _constraint_residual(d_kept, t, p_hat, b_kept, const2_s)

    # absolute term covers the equality-constrained (mu = 0) case
    slack_limit = mu_s * (1.0 + slack) + slack * scale * (mu == 0.0)
    feasible = resid <= slack_limit
    resid = resid / beta
    result = SolveResult(
        p_hat=p_hat,
        iterations=iters,
        primal_residual=float(r_pri),
        dual_residual=float(s_dual),
        objective=0.0,
        converged=bool(loop_converged and feasible),
        constraint_residual=resid,
        mu=mu,
    )
    return _finish(result, w_op, n, t, npp)


def _finish(result: SolveResult, w_op, n: int, t: int, npp: int) -> SolveResult:
    w_base = _as_w_matrix(w_op, n)
    result.objective = float(np.abs(w_base @ np.asarray(result.p_hat).reshape(-1)).sum())
    return result


def _b_apply(d_kept: np.ndarray, t: int, p: np.ndarray) -> np.ndarray:
    npp = d_kept.shape[1]
    cols = p.reshape(t, npp).T
    return np.ravel(d_kept @ cols, order="F")


def _constraint_residual(d_kept, t, p, b_kept, const2) -> float:
    r = b_kept - _b_apply(d_kept, t, p)
    return math.sqrt(float(r @ r) + const2)


def _ball_correction(d_kept, t, p_hat, b_kept, mu_eff) -> np.ndarray:
    """Minimum-norm pullback of p_hat onto the residual ball."""
    r = b_kept - _b_apply(d_kept, t, p_hat)
    rnorm = float(np.linalg.norm(r))
    if rnorm <= mu_eff:
        return p_hat
    target = mu_eff * (1.0 - 1e-12)
    gram_r = d_kept @ d_kept.T
    eps = 1e-12 * max(np.trace(gram_r).real / gram_r.shape[0], 1.0)
    try:
        factor = cho_factor(gram_r + eps * np.eye(gram_r.shape[0]), check_finite=False)
    except np.linalg.LinAlgError:
        return p_hat
    mpp = d_kept.shape[0]
    delta = np.zeros_like(p_hat)
    coeff = 1.0 - target / rnorm
    npp = d_kept.shape[1]
    for c in range(t):
        y = cho_solve(factor, r[c * mpp : (c + 1) * mpp] * coeff, check_finite=False)
        delta[c * npp : (c + 1) * npp] = d_kept.T @ y
    return p_hat + delta


def default_mu(measurement, mu_factor: float = 0.05) -> float:
    """Residual-ball radius as a fraction of the measurement norm."""
    return float(mu_factor) * float(np.linalg.norm(np.asarray(measurement).reshape(-1)))


def _measurement_array(r) -> np.ndarray:
    if isinstance(r, AutocorrVector):
        return r.values
    return np.asarray(r, dtype=complex)


def solve_lasso_cwss(
    bundle: DictionaryBundle,
    r_y,
    config: SolverConfig = SolverConfig(),
    mu_factor: float = 0.05,
    backend: str | None = None,
) -> SolveResult:
    """Plain sparse recovery: min ||p||_1 s.t. ||r_y - D p||_2 <= mu."""
    b = _measurement_array(r_y)
    if b.size != bundle.d.shape[0]:
        raise ValueError(f"measurement length {b.size} != dictionary rows {bundle.d.shape[0]}")
    cfg = config if config.mu is not None else replace(config, mu=default_mu(b, mu_factor))
    return solve_constrained_l1(bundle.d, None, b, cfg, backend=backend)


def solve_tvm_cwss(
    bundle: DictionaryBundle,
    v: TvOperator,
    r_stack,
    config: SolverConfig = SolverConfig(),
    mu_factor: float = 0.05,
    backend: str | None = None,
) -> SolveResult:
    """Total-variation recovery over T stacked periods.

    ``r_stack`` is the 2M x T measurement matrix (or its column-major vec);
    the result's ``p_hat`` is the recovered 2N x T PSD matrix.
    """
    r = np.asarray(r_stack, dtype=complex)
    if r.ndim == 2:
        r = np.ravel(r, order="F")
    two_m = bundle.d.shape[0]
    two_n = bundle.d.shape[1]
    if r.size != two_m * v.t:
        raise ValueError(f"stacked measurement length {r.size} != {two_m} x {v.t}")
    if v.n2 != two_n:
        raise ValueError(f"TV operator bin count {v.n2} != dictionary columns {two_n}")
    op = bundle.stacked(v.t)
    cfg = config if config.mu is not None else replace(config, mu=default_mu(r, mu_factor))
    result = solve_constrained_l1(op, v, r, cfg, backend=backend)
    result.p_hat = unvec_columns(result.p_hat, two_n, v.t)
    return result


@dataclass(frozen=True)
class L0Result:
    """Outcome of the exhaustive sparsest-feasible search."""

    p: np.ndarray | None
    support: tuple[int, ...]
    residual: float
    found: bool


def l0_oracle(d_matrix, b, max_support: int, tol: float = 1e-9) -> L0Result:
    """Exhaustively search supports of size 0..max_support for the sparsest
    p with ||b - D p||_2 <= tol (least squares per support).

    Ties at the winning size break by smaller residual, then lexicographic
    support.  Only sensible for small dictionaries (<= 20 columns).
    """
    d = np.asarray(d_matrix, dtype=complex)
    if d.shape[1] > 20:
        raise ValueError("exhaustive search limited to 20 columns")
    if not 0 <= max_support <= d.shape[1]:
        raise ValueError("max_support out of range")
    d_lift = _real_lift(d)
    b_lift = _lift_measurement(np.asarray(b, dtype=complex).reshape(-1), 1)
    n = d.shape[1]
    for size in range(max_support + 1):
        best = None
        for support in itertools.combinations(range(n), size):
            if size == 0:
                resid = float(np.linalg.norm(b_lift))
                coef = np.empty(0)
            else:
                cols = d_lift[:, support]
                coef, _, _, _ = np.linalg.lstsq(cols, b_lift, rcond=None)
                resid = float(np.linalg.norm(b_lift - cols @ coef))
            if resid <= tol and (best is None or resid < best[0]):
                best = (resid, support, coef)
        if best is not None:
            resid, support, coef = best
            p = np.zeros(n)
            p[list(support)] = coef
            return L0Result(p=p, support=tuple(support), residual=resid, found=True)
    return L0Result(p=None, support=(), residual=math.inf, found=False)


@dataclass(frozen=True)
class BoundsReport:
    """Measurement-count comparison between the two recovery programs."""

    n: int
    s: float
    k: float
    delta: float
    t: int
    c: float
    m_lasso: float = field(init=False)
    m_tvm: float = field(init=False)
    ratio: float = field(init=False)

    def __post_init__(self):
        if min(self.n, self.s, self.k, self.delta, self.t, self.c) <= 0:
            raise ValueError("all bound inputs must be positive")
        if self.delta > self.s:
            raise ValueError("delta must not exceed s")
        if 2 * self.k > self.n:
            raise ValueError("need 2k <= n")
        if self.s >= self.n:
            raise ValueError("need s < n")
        m_lasso = self.t * self.c * self.s * math.log(self.n / self.s)
        m_tvm = self.c * (
            (self.t - 1) * self.delta * math.log(self.n / self.delta)
            + self.k * math.log(self.n / (2 * self.k))
        )
        object.__setattr__(self, "m_lasso", m_lasso)
        object.__setattr__(self, "m_tvm", m_tvm)
        object.__setattr__(self, "ratio", m_tvm / m_lasso)

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "s": self.s,
            "k": self.k,
            "delta": self.delta,
            "t": self.t,
            "c": self.c,
            "m_lasso": self.m_lasso,
            "m_tvm": self.m_tvm,
            "ratio": self.ratio,
        }


def measurement_bounds(n: int, s: float, k: float, delta: float, t: int, c: float = 1.0) -> BoundsReport:
    """Sufficient measurement counts (natural log): T C S log(n/S) for plain
    recovery versus C[(T-1) Delta log(n/Delta) + K log(n/2K)] for the
    total-variation program."""
    return BoundsReport(n=n, s=s, k=k, delta=delta, t=t, c=c)


def rip_probe(matrix, s: int, trials: int, seed: int) -> float:
    """Monte Carlo lower bound on the restricted-isometry constant delta_s.

    Maximizes |  ||A v||^2 - 1 | over random s-sparse unit vectors; supports
    are nested in s for a fixed seed, so the probe is monotone in s.  This is
    a lower bound only — certifying delta_s exactly is intractable.
    """
    a = np.asarray(matrix)
    cols = a.shape[1]
    if not 1 <= s <= cols:
        raise ValueError("need 1 <= s <= columns")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    worst = 0.0
    for i in range(trials):
        rng = np.random.default_rng([seed, i])
        perm = rng.permutation(cols)
        vals = rng.standard_normal(cols)
        # evaluate every sparsity level up to s so candidate sets are nested
        for k in range(1, s + 1):
            v = np.zeros(cols)
            v[perm[:k]] = vals[:k]
            norm = np.linalg.norm(v)
            if norm == 0.0:
                continue
            v /= norm
            av = a @ v
            worst = max(worst, abs(float(np.vdot(av, av).real) - 1.0))
    return worst
