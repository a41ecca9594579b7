# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled back-substitution kernel; mirrors _kernels_py.back_substitute.

The inner reduction runs through BLAS ddot, so the compiled path keeps
numpy's vectorized dot but drops the per-row Python dispatch.
"""

import numpy as np

from scipy.linalg.cython_blas cimport ddot


def back_substitute(double[::1] nodes, double[::1] widths, double[::1] weights,
                    double[::1] denoms, double q, Py_ssize_t start):
    cdef Py_ssize_t n_cells = widths.shape[0]
    out = np.zeros(n_cells)
    cdef double[::1] y = out
    cdef Py_ssize_t n
    cdef int length, inc = 1
    cdef double acc, suffix
    y[start] = 1.0
    suffix = y[start] * widths[start]
    for n in range(start - 1, -1, -1):
        length = <int> (start - n)
        acc = ddot(&length, &y[n + 1], &inc, &weights[1], &inc)
        y[n] = (nodes[n] * acc + q * suffix) / denoms[n]
        suffix += y[n] * widths[n]
    return out
