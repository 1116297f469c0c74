# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled neighborhood-estimate kernels.

One estimate per (run, node) pair over the node's closed neighborhood; this
inner loop dominates the Monte Carlo runtime for the estimator-based
detector variants. Semantics match ``_kernels_py`` (and the scalar functions
in ``estimators``) up to floating-point summation order.
"""
import numpy as np

from libc.math cimport ceil, fabs, isnan, log
from libc.stdlib cimport free, malloc

cdef double MAD_NORM = 1.483
cdef double GOLDEN = 0.6180339887498949

cdef int KIND_MEAN = 0
cdef int KIND_MEDIAN = 1
cdef int KIND_HUBER = 2
cdef int KIND_MYRIAD = 3


cdef void _insertion_sort(double* x, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double key
    for i in range(1, n):
        key = x[i]
        j = i - 1
        while j >= 0 and x[j] > key:
            x[j + 1] = x[j]
            j -= 1
        x[j + 1] = key


cdef double _median_sorted(double* x, Py_ssize_t n) noexcept nogil:
    if n % 2:
        return x[n // 2]
    return 0.5 * (x[n // 2 - 1] + x[n // 2])


cdef double _median_of(const double* x, double* scratch, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t j
    for j in range(n):
        scratch[j] = x[j]
    _insertion_sort(scratch, n)
    return _median_sorted(scratch, n)


cdef double _mad_of(const double* x, double* scratch, Py_ssize_t n, double med) noexcept nogil:
    cdef Py_ssize_t j
    for j in range(n):
        scratch[j] = fabs(x[j] - med)
    _insertion_sort(scratch, n)
    return MAD_NORM * _median_sorted(scratch, n)


cdef double _mean_of(const double* x, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t j
    cdef double s = 0.0
    for j in range(n):
        s += x[j]
    return s / n


cdef double _huber_of(
    const double* x,
    double* scratch,
    Py_ssize_t n,
    double c,
    double tol,
    int max_iter,
) noexcept nogil:
    cdef double med = _median_of(x, scratch, n)
    cdef double scale = _mad_of(x, scratch, n, med)
    if scale == 0.0:
        return med
    cdef double mu = med
    cdef double mu_new, sw, swx, r, w
    cdef Py_ssize_t j
    cdef int it
    for it in range(max_iter):
        sw = 0.0
        swx = 0.0
        for j in range(n):
            r = fabs(x[j] - mu) / scale
            w = 1.0 if r <= c else c / r
            sw += w
            swx += w * x[j]
        mu_new = swx / sw
        if fabs(mu_new - mu) / scale < tol:
            return mu_new
        mu = mu_new
    return mu


cdef double _myriad_cost(const double* x, Py_ssize_t n, double m2, double norm, double eta) noexcept nogil:
    cdef double cost = 1.0
    cdef double d
    cdef Py_ssize_t j
    for j in range(n):
        d = x[j] - eta
        cost *= (m2 + d * d) / norm
    return cost


cdef double _myriad_of(
    const double* x,
    double* scratch,
    Py_ssize_t n,
    double m_fixed,
    int grid_points,
    double refine_tol,
) noexcept nogil:
    cdef Py_ssize_t j
    cdef double lo = x[0]
    cdef double hi = x[0]
    for j in range(1, n):
        if x[j] < lo:
            lo = x[j]
        if x[j] > hi:
            hi = x[j]
    if lo == hi:
        return lo
    cdef double med = _median_of(x, scratch, n)
    cdef double m
    if isnan(m_fixed):
        m = _mad_of(x, scratch, n, med)
        if m == 0.0:
            return med
    else:
        m = m_fixed
    cdef double span = hi - lo
    cdef double m2 = m * m
    cdef double norm = m2 + span * span
    cdef double step = span / (grid_points - 1)
    cdef double best_cost = _myriad_cost(x, n, m2, norm, lo)
    cdef double best_g = lo
    cdef double best_dist = fabs(lo - med)
    cdef double g, cost, dist
    cdef int i
    for i in range(1, grid_points):
        g = lo + step * i
        cost = _myriad_cost(x, n, m2, norm, g)
        if cost < best_cost:
            best_cost = cost
            best_g = g
            best_dist = fabs(g - med)
        elif cost == best_cost:
            dist = fabs(g - med)
            if dist < best_dist:
                best_g = g
                best_dist = dist
    cdef double a = best_g - step
    cdef double b = best_g + step
    if a < lo:
        a = lo
    if b > hi:
        b = hi
    cdef double wtol = refine_tol * span
    cdef double x1 = b - GOLDEN * (b - a)
    cdef double x2 = a + GOLDEN * (b - a)
    cdef double f1 = _myriad_cost(x, n, m2, norm, x1)
    cdef double f2 = _myriad_cost(x, n, m2, norm, x2)
    while b - a > wtol:
        if f1 <= f2:
            b = x2
            x2 = x1
            f2 = f1
            x1 = b - GOLDEN * (b - a)
            f1 = _myriad_cost(x, n, m2, norm, x1)
        else:
            a = x1
            x1 = x2
            f1 = f2
            x2 = a + GOLDEN * (b - a)
            f2 = _myriad_cost(x, n, m2, norm, x2)
    return 0.5 * (a + b)


def estimate_batch(
    double[:, ::1] eta,
    int[::1] indptr,
    int[::1] indices,
    int kind,
    double huber_c,
    double huber_tol,
    int huber_max_iter,
    double myriad_m,
    int myriad_grid,
    double myriad_refine_tol,
):
    """Neighborhood estimates for every (run, node) pair; returns (R, N)."""
    if kind < KIND_MEAN or kind > KIND_MYRIAD:
        raise ValueError(f"unknown kernel kind {kind}")
    cdef Py_ssize_t n_runs = eta.shape[0]
    cdef Py_ssize_t n_nodes = indptr.shape[0] - 1
    out_arr = np.empty((n_runs, n_nodes), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t max_d = 0, k, r, j, d, s
    for k in range(n_nodes):
        d = indptr[k + 1] - indptr[k]
        if d > max_d:
            max_d = d
    cdef double* vals = <double*> malloc(max_d * sizeof(double))
    cdef double* scratch = <double*> malloc(max_d * sizeof(double))
    if vals == NULL or scratch == NULL:
        free(vals)
        free(scratch)
        raise MemoryError()
    try:
        with nogil:
            for r in range(n_runs):
                for k in range(n_nodes):
                    s = indptr[k]
                    d = indptr[k + 1] - s
                    for j in range(d):
                        vals[j] = eta[r, indices[s + j]]
                    if kind == KIND_MEAN:
                        out[r, k] = _mean_of(vals, d)
                    elif kind == KIND_MEDIAN:
                        out[r, k] = _median_of(vals, scratch, d)
                    elif kind == KIND_HUBER:
                        out[r, k] = _huber_of(vals, scratch, d, huber_c, huber_tol, huber_max_iter)
                    else:
                        out[r, k] = _myriad_of(vals, scratch, d, myriad_m, myriad_grid, myriad_refine_tol)
    finally:
        free(vals)
        free(scratch)
    return out_arr
