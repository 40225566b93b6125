# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the EM hot loop.

Same contract as ``_purekernels``; see that module for the documentation.
The per-row/per-component work is flat C loops with a hand-rolled Cholesky,
which beats vectorised NumPy for the small dimensions (d <= ~16) and modest
row counts this package fits over and over inside the simulation harness.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, isfinite, log, sqrt

cnp.import_array()

BACKEND_NAME = "compiled"

cdef double LOG_2PI = 1.8378770664093453


cdef inline bint _cholesky(const double[:, :] A, double[:, ::1] L) noexcept nogil:
    # Lower-triangular factor of a symmetric matrix; False if not SPD.
    cdef Py_ssize_t d = A.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(d):
        for j in range(i + 1):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if s <= 0.0 or not isfinite(s):
                    return False
                L[i, i] = sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    return True


cdef inline double _quad_form(const double[:, ::1] L, const double* x,
                              const double* mu, double* buf, Py_ssize_t d) noexcept nogil:
    # Solves L y = (x - mu) by forward substitution; returns |y|^2.
    cdef Py_ssize_t i, k
    cdef double s, q = 0.0
    for i in range(d):
        s = x[i] - mu[i]
        for k in range(i):
            s -= L[i, k] * buf[k]
        s /= L[i, i]
        buf[i] = s
        q += s * s
    return q


def component_log_densities(X, means, covs):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] mv = np.ascontiguousarray(means, dtype=np.float64)
    cdef const double[:, :, ::1] cv = np.ascontiguousarray(covs, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], d = Xv.shape[1], g = mv.shape[0]
    out_arr = np.empty((n, g), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    Ls_arr = np.empty((g, d, d), dtype=np.float64)
    cdef double[:, :, ::1] Ls = Ls_arr
    half_arr = np.empty(g, dtype=np.float64)
    cdef double[::1] half_logdet = half_arr
    buf_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] buf = buf_arr
    cdef Py_ssize_t i, z, k
    cdef double hl, q
    cdef bint ok

    for z in range(g):
        ok = _cholesky(cv[z], Ls[z])
        if not ok:
            raise np.linalg.LinAlgError(
                f"covariance of component {z} is not positive definite")
        hl = 0.0
        for k in range(d):
            hl += log(Ls[z, k, k])
        half_logdet[z] = hl

    with nogil:
        for i in range(n):
            for z in range(g):
                q = _quad_form(Ls[z], &Xv[i, 0], &mv[z, 0], &buf[0], d)
                out[i, z] = -0.5 * (d * LOG_2PI + q) - half_logdet[z]
    return out_arr


def em_step(X, weights, means, covs, double ridge_add):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[:, ::1] mv = np.ascontiguousarray(means, dtype=np.float64)
    cdef const double[:, :, ::1] cv = np.ascontiguousarray(covs, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], d = Xv.shape[1], g = mv.shape[0]

    Ls_arr = np.empty((g, d, d), dtype=np.float64)
    cdef double[:, :, ::1] Ls = Ls_arr
    logw_arr = np.empty(g, dtype=np.float64)
    cdef double[::1] logw = logw_arr
    half_arr = np.empty(g, dtype=np.float64)
    cdef double[::1] half_logdet = half_arr
    resp_arr = np.empty((n, g), dtype=np.float64)
    cdef double[:, ::1] resp = resp_arr
    buf_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] buf = buf_arr

    nw_arr = np.zeros(g, dtype=np.float64)
    cdef double[::1] nk = nw_arr
    nm_arr = np.zeros((g, d), dtype=np.float64)
    cdef double[:, ::1] nm = nm_arr
    nc_arr = np.zeros((g, d, d), dtype=np.float64)
    cdef double[:, :, ::1] nc = nc_arr

    cdef Py_ssize_t i, z, k, a, b
    cdef double hl, q, lp, row_max, s_row, r, loglik = 0.0, nz, da
    cdef double NEG_INF = -np.inf
    cdef bint ok

    for z in range(g):
        logw[z] = log(wv[z]) if wv[z] > 0.0 else NEG_INF
        ok = _cholesky(cv[z], Ls[z])
        if not ok:
            raise np.linalg.LinAlgError(
                f"covariance of component {z} is not positive definite")
        hl = 0.0
        for k in range(d):
            hl += log(Ls[z, k, k])
        half_logdet[z] = hl

    with nogil:
        # E-step: responsibilities plus the log-likelihood of the inputs.
        for i in range(n):
            row_max = NEG_INF
            for z in range(g):
                if logw[z] == NEG_INF:
                    resp[i, z] = NEG_INF
                    continue
                q = _quad_form(Ls[z], &Xv[i, 0], &mv[z, 0], &buf[0], d)
                lp = logw[z] - 0.5 * (d * LOG_2PI + q) - half_logdet[z]
                resp[i, z] = lp
                if lp > row_max:
                    row_max = lp
            s_row = 0.0
            for z in range(g):
                if resp[i, z] == NEG_INF:
                    resp[i, z] = 0.0
                elif resp[i, z] - row_max < -37.0:
                    # below double-precision resolution of the row sum
                    resp[i, z] = 0.0
                else:
                    r = exp(resp[i, z] - row_max)
                    resp[i, z] = r
                    s_row += r
            loglik += row_max + log(s_row)
            for z in range(g):
                if resp[i, z] == 0.0:
                    continue
                r = resp[i, z] / s_row
                resp[i, z] = r
                nk[z] += r
                for k in range(d):
                    nm[z, k] += r * Xv[i, k]

        # M-step: means, then scatter about the new means.
        for z in range(g):
            nz = nk[z] if nk[z] > 1e-300 else 1e-300
            for k in range(d):
                nm[z, k] /= nz

        for i in range(n):
            for z in range(g):
                r = resp[i, z]
                if r == 0.0:
                    continue
                for a in range(d):
                    da = Xv[i, a] - nm[z, a]
                    buf[a] = da
                    for b in range(a + 1):
                        nc[z, a, b] += r * da * buf[b]

        for z in range(g):
            nz = nk[z] if nk[z] > 1e-300 else 1e-300
            for a in range(d):
                for b in range(a + 1):
                    nc[z, a, b] /= nz
                    nc[z, b, a] = nc[z, a, b]
                nc[z, a, a] += ridge_add
            nk[z] /= n

    return loglik, nw_arr, nm_arr, nc_arr
