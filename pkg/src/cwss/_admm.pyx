# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ADMM iteration loop.

Mirrors ``cwss._admm_py.admm_loop`` exactly (same recursion, same stopping
rule); the hot loop runs without the GIL on BLAS calls and tight index loops.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt
from scipy.linalg.cython_blas cimport dgemv, dnrm2, dtrsv

cnp.import_array()


cdef void _gemv_rowmajor(double* a, int rows, int cols, double* x, double* y, double beta) noexcept nogil:
    # y = A x + beta * y for C-contiguous A (rows x cols)
    cdef double one = 1.0
    cdef int inc = 1
    dgemv(b"T", &cols, &rows, &one, a, &cols, x, &inc, &beta, y, &inc)


cdef void _gemv_t_rowmajor(double* a, int rows, int cols, double* x, double* y, double beta) noexcept nogil:
    # y = A^T x + beta * y for C-contiguous A (rows x cols)
    cdef double one = 1.0
    cdef int inc = 1
    dgemv(b"N", &cols, &rows, &one, a, &cols, x, &inc, &beta, y, &inc)


cdef void _cho_solve_lower(double* l, int n, double* x) noexcept nogil:
    # solve (L L^T) y = x in place; L is C-contiguous lower triangular
    cdef int inc = 1
    dtrsv(b"U", b"T", b"N", &n, l, &n, x, &inc)
    dtrsv(b"U", b"N", b"N", &n, l, &n, x, &inc)


cdef void _csr_apply(double[::1] data, int[::1] indices, int[::1] indptr, int q,
                     double* x, double* y) noexcept nogil:
    cdef int i, jj
    cdef double acc
    for i in range(q):
        acc = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            acc += data[jj] * x[indices[jj]]
        y[i] = acc


cdef void _csr_t_apply(double[::1] data, int[::1] indices, int[::1] indptr, int q, int n,
                       double* x, double* y) noexcept nogil:
    cdef int i, jj
    for i in range(n):
        y[i] = 0.0
    for i in range(q):
        for jj in range(indptr[i], indptr[i + 1]):
            y[indices[jj]] += data[jj] * x[i]


cdef double _nrm2(int n, double* x) noexcept nogil:
    cdef int inc = 1
    return dnrm2(&n, x, &inc)


def admm_loop(double[:, ::1] chol_l,
              double[:, ::1] d_real,
              int t_periods,
              double[::1] w_data,
              int[::1] w_indices,
              int[::1] w_indptr,
              int q_soft,
              double[::1] b,
              double mu,
              double rho,
              double alpha,
              int max_iter,
              double rel_tol_pri,
              double rel_tol_dual,
              double abs_tol,
              bint adapt,
              int adapt_every,
              double adapt_ratio,
              double adapt_factor):
    cdef int n = chol_l.shape[0]
    cdef int mpp = d_real.shape[0]
    cdef int npp = d_real.shape[1]
    cdef int m = t_periods * mpp
    cdef int q = w_indptr.shape[0] - 1

    p_arr = np.zeros(n)
    cdef double[::1] p = p_arr
    cdef double[::1] z = np.zeros(q)
    cdef double[::1] z_old = np.zeros(q)
    cdef double[::1] u = np.zeros(q)
    cdef double[::1] w = np.empty(m)
    cdef double[::1] w_old = np.empty(m)
    cdef double[::1] v = np.zeros(m)
    cdef double[::1] wp = np.zeros(q)
    cdef double[::1] bp = np.zeros(m)
    cdef double[::1] rhs = np.empty(n)
    cdef double[::1] tmp_m = np.empty(m)
    cdef double[::1] tmp_q = np.empty(q)
    cdef double[::1] tmp_n = np.empty(n)

    cdef double kappa = 1.0 / rho
    cdef double sqrt_dims_pri = sqrt(<double>(q + m))
    cdef double sqrt_dims_dual = sqrt(<double>n)
    cdef double r_pri = np.inf
    cdef double s_dual = np.inf
    cdef double tn, val, hat, acc1, acc2, norm_ax, norm_bz, eps_pri, eps_dual, y_norm, scale
    cdef bint converged = False
    cdef int it = 0, i, c
    cdef double one_minus_alpha = 1.0 - alpha

    with nogil:
        for i in range(m):
            w[i] = mu * b[i]
        for it in range(1, max_iter + 1):
            # rhs = W^T (z - u) + B^T (b - w - v)
            for i in range(q):
                tmp_q[i] = z[i] - u[i]
            _csr_t_apply(w_data, w_indices, w_indptr, q, n, &tmp_q[0], &rhs[0])
            for i in range(m):
                tmp_m[i] = b[i] - w[i] - v[i]
            for c in range(t_periods):
                _gemv_t_rowmajor(&d_real[0, 0], mpp, npp, &tmp_m[c * mpp], &tmp_n[c * npp], 0.0)
            for i in range(n):
                rhs[i] += tmp_n[i]
            _cho_solve_lower(&chol_l[0, 0], n, &rhs[0])
            for i in range(n):
                p[i] = rhs[i]

            _csr_apply(w_data, w_indices, w_indptr, q, &p[0], &wp[0])
            for c in range(t_periods):
                _gemv_rowmajor(&d_real[0, 0], mpp, npp, &p[c * npp], &bp[c * mpp], 0.0)

            # z update (soft threshold, then clamp rows), with over-relaxation
            for i in range(q):
                z_old[i] = z[i]
                hat = alpha * wp[i] + one_minus_alpha * z_old[i]
                val = hat + u[i]
                if i < q_soft:
                    if val > kappa:
                        z[i] = val - kappa
                    elif val < -kappa:
                        z[i] = val + kappa
                    else:
                        z[i] = 0.0
                else:
                    z[i] = val if val > 0.0 else 0.0
                u[i] = u[i] + hat - z[i]

            # w update (ball projection)
            for i in range(m):
                w_old[i] = w[i]
                hat = alpha * bp[i] + one_minus_alpha * (b[i] - w_old[i])
                tmp_m[i] = b[i] - hat - v[i]
            tn = _nrm2(m, &tmp_m[0])
            if tn <= mu or tn == 0.0:
                scale = 1.0
            else:
                scale = mu / tn
            for i in range(m):
                w[i] = tmp_m[i] * scale
                hat = alpha * bp[i] + one_minus_alpha * (b[i] - w_old[i])
                v[i] = v[i] + hat + w[i] - b[i]

            # primal residual: [W p - z; B p + w - b]
            acc1 = 0.0
            for i in range(q):
                val = wp[i] - z[i]
                acc1 += val * val
            for i in range(m):
                val = bp[i] + w[i] - b[i]
                acc1 += val * val
            r_pri = sqrt(acc1)

            # dual residual: rho * || B^T (w - w_old) - W^T (z - z_old) ||
            for i in range(m):
                tmp_m[i] = w[i] - w_old[i]
            for c in range(t_periods):
                _gemv_t_rowmajor(&d_real[0, 0], mpp, npp, &tmp_m[c * mpp], &tmp_n[c * npp], 0.0)
            for i in range(q):
                tmp_q[i] = z[i] - z_old[i]
            _csr_t_apply(w_data, w_indices, w_indptr, q, n, &tmp_q[0], &rhs[0])
            acc1 = 0.0
            for i in range(n):
                val = tmp_n[i] - rhs[i]
                acc1 += val * val
            s_dual = rho * sqrt(acc1)

            # stopping thresholds
            acc1 = 0.0
            for i in range(q):
                acc1 += wp[i] * wp[i]
            for i in range(m):
                acc1 += bp[i] * bp[i]
            norm_ax = sqrt(acc1)
            acc2 = 0.0
            for i in range(q):
                acc2 += z[i] * z[i]
            for i in range(m):
                val = b[i] - w[i]
                acc2 += val * val
            norm_bz = sqrt(acc2)
            eps_pri = sqrt_dims_pri * abs_tol + rel_tol_pri * (norm_ax if norm_ax > norm_bz else norm_bz)

            # the blocks' dual contributions cancel at optimality, so scale by
            # the larger of the two rather than their (vanishing) sum
            _csr_t_apply(w_data, w_indices, w_indptr, q, n, &u[0], &rhs[0])
            for c in range(t_periods):
                _gemv_t_rowmajor(&d_real[0, 0], mpp, npp, &v[c * mpp], &tmp_n[c * npp], 0.0)
            acc1 = 0.0
            acc2 = 0.0
            for i in range(n):
                acc1 += rhs[i] * rhs[i]
                acc2 += tmp_n[i] * tmp_n[i]
            y_norm = rho * sqrt(acc1 if acc1 > acc2 else acc2)
            eps_dual = sqrt_dims_dual * abs_tol + rel_tol_dual * y_norm

            if r_pri <= eps_pri and s_dual <= eps_dual:
                converged = True
                break

            if adapt and it % adapt_every == 0:
                if r_pri > adapt_ratio * s_dual:
                    rho *= adapt_factor
                    kappa = 1.0 / rho
                    for i in range(q):
                        u[i] /= adapt_factor
                    for i in range(m):
                        v[i] /= adapt_factor
                elif s_dual > adapt_ratio * r_pri:
                    rho /= adapt_factor
                    kappa = 1.0 / rho
                    for i in range(q):
                        u[i] *= adapt_factor
                    for i in range(m):
                        v[i] *= adapt_factor

    return p_arr, it, float(r_pri), float(s_dual), bool(converged), float(rho)
