# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled k-means kernels.

Floating-point operations are performed in the same order as the numpy
fallback in ``_pykernels`` so both backends agree bitwise.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange

cnp.import_array()


def assign_labels(const double[:, ::1] points, const double[:, ::1] centers,
                  int n_threads=1):
    """Nearest center per point (ties to the lowest center id) and the
    squared distance to it."""
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    cdef Py_ssize_t k = centers.shape[0]
    labels_arr = np.empty(n, dtype=np.int64)
    mind_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] labels = labels_arr
    cdef double[::1] mind = mind_arr
    cdef Py_ssize_t i, c, j
    cdef double acc, diff, best
    cdef cnp.int64_t best_c
    if n_threads < 1:
        n_threads = 1
    for i in prange(n, nogil=True, schedule="static", num_threads=n_threads):
        best = 0.0
        best_c = -1
        for c in range(k):
            acc = 0.0
            for j in range(d):
                diff = points[i, j] - centers[c, j]
                acc = acc + diff * diff
            if best_c < 0 or acc < best:
                best = acc
                best_c = c
        labels[i] = best_c
        mind[i] = best
    return labels_arr, mind_arr


def centroid_sums(const double[:, ::1] points, const cnp.int64_t[::1] labels,
                  Py_ssize_t k):
    """Per-cluster coordinate sums and member counts, accumulated in
    point order."""
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    sums_arr = np.zeros((k, d), dtype=np.float64)
    counts_arr = np.zeros(k, dtype=np.int64)
    cdef double[:, ::1] sums = sums_arr
    cdef cnp.int64_t[::1] counts = counts_arr
    cdef Py_ssize_t i, j
    cdef cnp.int64_t c
    with nogil:
        for i in range(n):
            c = labels[i]
            counts[c] += 1
            for j in range(d):
                sums[c, j] = sums[c, j] + points[i, j]
    return sums_arr, counts_arr


def sequential_sum(const double[::1] values):
    """Left-to-right sum."""
    cdef Py_ssize_t i
    cdef double acc = 0.0
    with nogil:
        for i in range(values.shape[0]):
            acc = acc + values[i]
    return acc
