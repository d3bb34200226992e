# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for corner-weight interpolation leaves.

Hot inner loops of leaf fitting and evaluation: corner-basis products,
fixed-component EM, and multilinear density sums.  Must match the contract
of _fallback.py exactly.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, log

cnp.import_array()

BACKEND = "compiled"


def corner_basis(u):
    """Basis values of the 2^d corner densities at unit-box points."""
    cdef double[:, ::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = uu.shape[0], d = uu.shape[1]
    cdef Py_ssize_t k = 1 << d
    out = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, c, j
    cdef double v
    cdef double scale = <double> k
    for i in range(n):
        for c in range(k):
            v = scale
            for j in range(d):
                if (c >> j) & 1:
                    v *= uu[i, j]
                else:
                    v *= 1.0 - uu[i, j]
            o[i, c] = v
    return out


def multilinear_density(u, weights):
    """Unit-box density sum_c w_c g_c(u) at each point."""
    cdef double[:, ::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = uu.shape[0], d = uu.shape[1]
    cdef Py_ssize_t k = 1 << d
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, c, j
    cdef double v, acc
    cdef double scale = <double> k
    for i in range(n):
        acc = 0.0
        for c in range(k):
            v = scale * w[c]
            for j in range(d):
                if (c >> j) & 1:
                    v *= uu[i, j]
                else:
                    v *= 1.0 - uu[i, j]
            acc += v
        o[i] = acc
    return out


def em_corner_weights(u, max_iters, rel_tol):
    """Fit corner weights by EM with the component densities held fixed."""
    cdef double[:, ::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = uu.shape[0], d = uu.shape[1]
    cdef Py_ssize_t k = 1 << d
    cdef int iters = int(max_iters)
    cdef double tol = float(rel_tol)
    if n == 0:
        return np.full(k, 1.0 / k), np.zeros(1)
    basis_arr = corner_basis(np.asarray(uu))
    cdef double[:, ::1] basis = basis_arr
    w_arr = np.full(k, 1.0 / k)
    cdef double[::1] w = w_arr
    neww_arr = np.empty(k, dtype=np.float64)
    cdef double[::1] neww = neww_arr
    dens_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] dens = dens_arr
    cdef Py_ssize_t i, c, it
    cdef double acc, ll, new_ll, gain, r
    ll = 0.0
    for i in range(n):
        acc = 0.0
        for c in range(k):
            acc += basis[i, c] * w[c]
        dens[i] = acc
        ll += log(acc)
    trace = [ll]
    for it in range(iters):
        for c in range(k):
            neww[c] = 0.0
        for i in range(n):
            r = 1.0 / dens[i]
            for c in range(k):
                neww[c] += basis[i, c] * w[c] * r
        for c in range(k):
            w[c] = neww[c] / n
        new_ll = 0.0
        for i in range(n):
            acc = 0.0
            for c in range(k):
                acc += basis[i, c] * w[c]
            dens[i] = acc
            new_ll += log(acc)
        trace.append(new_ll)
        gain = new_ll - ll
        ll = new_ll
        if gain < tol * max(1.0, fabs(new_ll)):
            break
    return w_arr, np.asarray(trace)
