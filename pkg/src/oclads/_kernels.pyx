# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the numeric hot paths.

Mirrors oclads._kernels_py; selected at import time by oclads.kernels.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

COMPILED = True


cdef double _t_l2_row(const double[::1] values,
                      const cnp.uint8_t[::1] labels,
                      double n1, double n2) noexcept nogil:
    cdef Py_ssize_t m = values.shape[0]
    cdef Py_ssize_t t
    cdef double c1 = 0.0, c2 = 0.0, gap, total = 0.0
    for t in range(m - 1):
        if labels[t]:
            c1 += 1.0
        else:
            c2 += 1.0
        gap = c1 / n1 - c2 / n2
        total += gap * gap * (values[t + 1] - values[t])
    return total


def t_l2_sorted(values, is_first, n1, n2):
    """Integrated squared ECDF difference over pre-sorted pooled values."""
    cdef double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef cnp.uint8_t[::1] lab = np.ascontiguousarray(is_first, dtype=np.uint8)
    return _t_l2_row(v, lab, <double> n1, <double> n2)


def perm_stats_sorted(values, labels, n1, n2):
    """t_l2_sorted evaluated for every row of a label-assignment matrix."""
    cdef double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef cnp.uint8_t[:, ::1] lab = np.ascontiguousarray(labels, dtype=np.uint8)
    cdef Py_ssize_t n_rows = lab.shape[0]
    cdef double d1 = <double> n1, d2 = <double> n2
    out_arr = np.empty(n_rows, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k
    with nogil:
        for k in range(n_rows):
            out[k] = _t_l2_row(v, lab[k], d1, d2)
    return out_arr


def kernel_mean_scores(train, test, bandwidth):
    """Negative mean RBF similarity of each test row to the training rows."""
    cdef double[:, ::1] tr = np.ascontiguousarray(train, dtype=np.float64)
    cdef double[:, ::1] te = np.ascontiguousarray(test, dtype=np.float64)
    cdef Py_ssize_t n = tr.shape[0], dim = tr.shape[1], m = te.shape[0]
    cdef double inv = 1.0 / (2.0 * <double> bandwidth * <double> bandwidth)
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, t, c
    cdef double acc, d2, diff
    with nogil:
        for i in range(m):
            acc = 0.0
            for t in range(n):
                d2 = 0.0
                for c in range(dim):
                    diff = te[i, c] - tr[t, c]
                    d2 += diff * diff
                acc += exp(-d2 * inv)
            out[i] = -acc / n
    return out_arr


def pairwise_distances(x):
    """Condensed Euclidean distance vector, length n*(n-1)/2."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], dim = xv.shape[1]
    if n < 2:
        return np.empty(0, dtype=np.float64)
    out_arr = np.empty(n * (n - 1) // 2, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, c, k = 0
    cdef double d2, diff
    with nogil:
        for i in range(n - 1):
            for j in range(i + 1, n):
                d2 = 0.0
                for c in range(dim):
                    diff = xv[i, c] - xv[j, c]
                    d2 += diff * diff
                out[k] = sqrt(d2)
                k += 1
    return out_arr
