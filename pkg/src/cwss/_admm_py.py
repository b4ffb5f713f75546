"""Pure-NumPy ADMM iteration loop (fallback backend).

Solves  min ||z[:q_soft]||_1  s.t.  z = W p,  z[q_soft:] >= 0,
        ||b - B p||_2 <= mu
with B = kron(I_T, d_real), via scaled-dual ADMM with over-relaxation and
residual-balancing penalty updates.  The penalty never enters the cached
normal-equation factor, so updates are free.

The compiled kernel in ``_admm.pyx`` implements the identical recursion; the
orchestration in :mod:`cwss.solve` prepares identical inputs for both.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_solve


def admm_loop(
    chol_l,
    d_real,
    t_periods,
    w_data,
    w_indices,
    w_indptr,
    q_soft,
    b,
    mu,
    rho,
    alpha,
    max_iter,
    rel_tol_pri,
    rel_tol_dual,
    abs_tol,
    adapt,
    adapt_every,
    adapt_ratio,
    adapt_factor,
):
    n = chol_l.shape[0]
    mpp, npp = d_real.shape
    m = t_periods * mpp
    q = len(w_indptr) - 1
    w_mat = sp.csr_matrix((w_data, w_indices, w_indptr), shape=(q, n))
    w_t = w_mat.T.tocsr()

    def b_apply(vec):
        cols = vec.reshape(t_periods, npp).T
        return np.ravel(d_real @ cols, order="F")

    def b_t_apply(vec):
        cols = vec.reshape(t_periods, mpp).T
        return np.ravel(d_real.T @ cols, order="F")

    p = np.zeros(n)
    z = np.zeros(q)
    u = np.zeros(q)
    w = mu * b
    v = np.zeros(m)
    wp = np.zeros(q)
    bp = np.zeros(m)
    r_pri = np.inf
    s_dual = np.inf
    converged = False
    it = 0
    kappa = 1.0 / rho
    sqrt_dims_pri = np.sqrt(q + m)
    sqrt_dims_dual = np.sqrt(n)

    for it in range(1, max_iter + 1):
        rhs = w_t @ (z - u) + b_t_apply(b - w - v)
        p = cho_solve((chol_l, True), rhs, check_finite=False)
        wp = w_mat @ p
        bp = b_apply(p)

        z_old = z
        w_old = w
        hat_wp = alpha * wp + (1.0 - alpha) * z_old
        hat_bp = alpha * bp + (1.0 - alpha) * (b - w_old)

        val = hat_wp + u
        z = np.sign(val) * np.maximum(np.abs(val) - kappa, 0.0)
        if q_soft < q:
            z[q_soft:] = np.maximum(val[q_soft:], 0.0)

        tvec = b - hat_bp - v
        tn = np.linalg.norm(tvec)
        w = tvec if tn <= mu or tn == 0.0 else tvec * (mu / tn)

        u = u + hat_wp - z
        v = v + hat_bp + w - b

        r_pri = np.sqrt(np.linalg.norm(wp - z) ** 2 + np.linalg.norm(bp + w - b) ** 2)
        dual_vec = b_t_apply(w - w_old) - (w_t @ (z - z_old))
        s_dual = rho * np.linalg.norm(dual_vec)

        norm_ax = np.sqrt(np.linalg.norm(wp) ** 2 + np.linalg.norm(bp) ** 2)
        norm_bz = np.sqrt(np.linalg.norm(z) ** 2 + np.linalg.norm(b - w) ** 2)
        eps_pri = sqrt_dims_pri * abs_tol + rel_tol_pri * max(norm_ax, norm_bz)
        # the blocks' dual contributions cancel at optimality, so scale by the
        # larger of the two rather than their (vanishing) sum
        y_norm = rho * max(np.linalg.norm(w_t @ u), np.linalg.norm(b_t_apply(v)))
        eps_dual = sqrt_dims_dual * abs_tol + rel_tol_dual * y_norm

        if r_pri <= eps_pri and s_dual <= eps_dual:
            converged = True
            break

        if adapt and it % adapt_every == 0:
            if r_pri > adapt_ratio * s_dual:
                rho *= adapt_factor
                kappa = 1.0 / rho
                u /= adapt_factor
                v /= adapt_factor
            elif s_dual > adapt_ratio * r_pri:
                rho /= adapt_factor
                kappa = 1.0 / rho
                u *= adapt_factor
                v *= adapt_factor

    return p, it, float(r_pri), float(s_dual), converged, rho
