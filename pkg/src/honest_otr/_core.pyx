# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: leave-one-out kernel weights and simplex pivoting."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, INFINITY

cnp.import_array()

OPTIMAL, UNBOUNDED, ITERATION_LIMIT = 0, 1, 2
cdef Py_ssize_t STALL_LIMIT = 20


def loo_smooth(u, y, x, double h):
    cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = uv.shape[0]
    cdef Py_ssize_t i, j
    cdef double d, q, qmin, wij, s0, s1, sy, s1y, g
    cdef double inv_h = 1.0 / h
    w_arr = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] w = w_arr
    ghat_arr = np.empty(n, dtype=np.float64)
    g1_arr = np.empty(n, dtype=np.float64)
    s0_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] ghat = ghat_arr
    cdef double[::1] g1hat = g1_arr
    cdef double[::1] s0v = s0_arr

    with nogil:
        for i in range(n):
            qmin = INFINITY
            for j in range(n):
                if j != i:
                    d = (uv[i] - uv[j]) * inv_h
                    q = 0.5 * d * d
                    if q < qmin:
                        qmin = q
            s0 = 0.0
            s1 = 0.0
            sy = 0.0
            s1y = 0.0
            for j in range(n):
                if j == i:
                    w[i, j] = 0.0
                    continue
                d = (uv[i] - uv[j]) * inv_h
                wij = exp(qmin - 0.5 * d * d)
                w[i, j] = wij
                s0 += wij
                sy += wij * yv[j]
                # derivative weight: -d * w / h
                s1 -= d * wij * inv_h
                s1y -= d * wij * inv_h * yv[j]
            g = sy / s0
            ghat[i] = g
            g1hat[i] = s1y / s0 - g * (s1 / s0)
            s0v[i] = s0

    ehat = w_arr @ np.asarray(x, dtype=np.float64)
    ehat /= s0_arr[:, None]
    return ghat_arr, g1_arr, ehat


def simplex_iterate(double[:, ::1] t, long[::1] basis, Py_ssize_t n_eligible,
                    double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t m = t.shape[0] - 1
    cdef Py_ssize_t ncol = t.shape[1]
    cdef Py_ssize_t rhs = ncol - 1
    cdef Py_ssize_t it, i, j, k, r
    cdef Py_ssize_t stall = 0
    cdef double best, ratio, piv, f, eps, most

    for it in range(max_iter):
        # most negative reduced cost, or Bland's lowest index while stalled
        j = -1
        most = -tol
        for k in range(n_eligible):
            if t[m, k] < most:
                j = k
                if stall >= STALL_LIMIT:
                    break
                most = t[m, k]
        if j < 0:
            return OPTIMAL, it
        best = INFINITY
        for i in range(m):
            if t[i, j] > tol:
                ratio = t[i, rhs] / t[i, j]
                if ratio < best:
                    best = ratio
        r = -1
        if best < INFINITY:
            eps = 1e-12 * (best if best > 1.0 else (1.0 if best > -1.0 else -best))
            for i in range(m):
                if t[i, j] > tol and t[i, rhs] / t[i, j] <= best + eps:
                    if r < 0 or basis[i] < basis[r]:
                        r = i
        if r < 0:
            return UNBOUNDED, it
        if best <= 1e-12:
            stall += 1
        else:
            stall = 0
        piv = t[r, j]
        for k in range(ncol):
            t[r, k] /= piv
        for i in range(m + 1):
            if i == r:
                continue
            f = t[i, j]
            if f != 0.0:
                for k in range(ncol):
                    t[i, k] -= f * t[r, k]
        basis[r] = j
    return ITERATION_LIMIT, max_iter
