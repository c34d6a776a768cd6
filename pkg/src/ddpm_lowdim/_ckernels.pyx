# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Must stay bitwise-equivalent to ``_pykernels``."""

import numpy as np

from libc.math cimport INFINITY


def greedy_net(const double[:, ::1] points, double eps):
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    cdef Py_ssize_t i, j, cur = 0, arg
    cdef double s, diff, best
    cdef double eps2 = eps * eps
    cdef double[::1] mind = np.full(n, INFINITY)
    centers = [0]
    while True:
        best = -1.0
        arg = -1
        for i in range(n):
            # partial sums never decrease, so stop once s cannot improve mind[i]
            s = 0.0
            for j in range(d):
                diff = points[i, j] - points[cur, j]
                s = s + diff * diff
                if s >= mind[i]:
                    break
            if s < mind[i]:
                mind[i] = s
            if mind[i] > best:
                best = mind[i]
                arg = i
        if best <= eps2:
            break
        centers.append(arg)
        cur = arg
    return np.asarray(centers, dtype=np.intp)


def propagate_block_variances(
    const double[::1] alpha,
    const double[::1] one_minus_alpha_bar,
    const double[::1] eta,
    const double[::1] sigma2,
    Py_ssize_t stop_t,
    double on_var,
    double off_var,
    double limit,
):
    cdef Py_ssize_t t, i
    cdef Py_ssize_t T = alpha.shape[0]
    cdef double m_on, m_off
    for t in range(T, stop_t, -1):
        i = t - 1
        m_on = 1.0 - eta[i]
        m_off = 1.0 - eta[i] / one_minus_alpha_bar[i]
        on_var = (m_on * m_on * on_var + sigma2[i]) / alpha[i]
        off_var = (m_off * m_off * off_var + sigma2[i]) / alpha[i]
        if not (on_var <= limit and off_var <= limit):
            return on_var, off_var, t
    return on_var, off_var, 0
