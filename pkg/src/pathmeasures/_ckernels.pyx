# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same contracts as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, INFINITY, isfinite

cnp.import_array()

CONVERGED, INFEASIBLE, MAX_ITERATIONS = 0, 1, 2


def path_weights(initial, kernels):
    cdef const double[::1] init = np.ascontiguousarray(initial, dtype=np.float64)
    cdef const double[:, :, ::1] ker = np.ascontiguousarray(kernels, dtype=np.float64)
    cdef Py_ssize_t s = init.shape[0]
    cdef Py_ssize_t steps = ker.shape[0]
    cdef Py_ssize_t total = s
    cdef Py_ssize_t k
    for k in range(steps):
        total *= s
    out_arr = np.empty(total, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] prev = np.empty(total, dtype=np.float64)
    cdef Py_ssize_t n = s, p, j, i
    for i in range(s):
        out[i] = init[i]
    for k in range(steps):
        for p in range(n):
            prev[p] = out[p]
        for p in range(n):
            i = p % s
            for j in range(s):
                out[p * s + j] = prev[p] * ker[k, i, j]
        n *= s
    return out_arr


cdef inline double _scale(double log_target, double lse) nogil:
    if log_target == -INFINITY:
        return -INFINITY
    return log_target - lse


cdef double _row_lse(const double[:, ::1] lk, double[::1] v, Py_ssize_t i) nogil:
    cdef Py_ssize_t j, m = lk.shape[1]
    cdef double mx = -INFINITY, t, acc = 0.0
    for j in range(m):
        t = lk[i, j] + v[j]
        if t > mx:
            mx = t
    if not isfinite(mx):
        return mx
    for j in range(m):
        acc += exp(lk[i, j] + v[j] - mx)
    return log(acc) + mx


cdef double _col_lse(const double[:, ::1] lk, double[::1] u, Py_ssize_t j) nogil:
    cdef Py_ssize_t i, n = lk.shape[0]
    cdef double mx = -INFINITY, t, acc = 0.0
    for i in range(n):
        t = lk[i, j] + u[i]
        if t > mx:
            mx = t
    if not isfinite(mx):
        return mx
    for i in range(n):
        acc += exp(lk[i, j] + u[i] - mx)
    return log(acc) + mx


def sinkhorn_log(log_k, log_mu0, log_mu1, log_g0, double tol, long max_iters,
                 long window, double min_decrease):
    cdef const double[:, ::1] lk = np.ascontiguousarray(log_k, dtype=np.float64)
    cdef const double[::1] la = np.ascontiguousarray(log_mu0, dtype=np.float64)
    cdef const double[::1] lb = np.ascontiguousarray(log_mu1, dtype=np.float64)
    cdef Py_ssize_t n = lk.shape[0], m = lk.shape[1], i, j
    log_f_arr = np.full(n, -np.inf)
    log_g_arr = np.array(log_g0, dtype=np.float64)
    cdef double[::1] lf = log_f_arr
    cdef double[::1] lg = log_g_arr
    cdef double prev = INFINITY, err = INFINITY, e_row, e_col, v
    cdef long it, stall = 0
    with nogil:
        for it in range(1, max_iters + 1):
            for i in range(n):
                lf[i] = _scale(la[i], _row_lse(lk, lg, i))
            for j in range(m):
                lg[j] = _scale(lb[j], _col_lse(lk, lf, j))
            e_row = 0.0
            for i in range(n):
                v = exp(lf[i] + _row_lse(lk, lg, i))
                if v != v:
                    v = 0.0
                e_row += fabs(v - exp(la[i]))
            e_col = 0.0
            for j in range(m):
                v = exp(lg[j] + _col_lse(lk, lf, j))
                if v != v:
                    v = 0.0
                e_col += fabs(v - exp(lb[j]))
            err = 0.5 * (e_row if e_row > e_col else e_col)
            if err <= tol:
                with gil:
                    return log_f_arr, log_g_arr, it, err, CONVERGED
            if prev - err < min_decrease:
                stall += 1
                if stall >= window:
                    with gil:
                        return log_f_arr, log_g_arr, it, err, INFEASIBLE
            else:
                stall = 0
            prev = err
    return log_f_arr, log_g_arr, max_iters, err, MAX_ITERATIONS
