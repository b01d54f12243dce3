# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the routing and evaluation inner loops.

Semantics must match erproute._kernels_py bit for bit: exact float-equality
ties, identical arithmetic order.
"""

from libc.stdint cimport int64_t

import numpy as np


def cost_adjusted_argmax(double[:, ::1] values, double[::1] adjusted_costs,
                         int64_t[::1] tie_rank):
    """Per row, argmax of values[i, j] - adjusted_costs[j]; exact ties take
    the smallest tie_rank."""
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t m = values.shape[1]
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] chosen = out
    cdef Py_ssize_t i, j, best_j
    cdef double score, best_score
    cdef int64_t best_rank
    for i in range(n):
        best_j = 0
        best_score = values[i, 0] - adjusted_costs[0]
        best_rank = tie_rank[0]
        for j in range(1, m):
            score = values[i, j] - adjusted_costs[j]
            if score > best_score or (score == best_score and tie_rank[j] < best_rank):
                best_j = j
                best_score = score
                best_rank = tie_rank[j]
        chosen[i] = best_j
    return out


def auroc_rank(double[::1] scores, unsigned char[::1] labels):
    """Mann-Whitney AUROC with half credit for tied scores.

    Accumulates integer pair counts and exact halves, so the result equals
    exhaustive pair enumeration exactly.
    """
    cdef Py_ssize_t n = scores.shape[0]
    # any sort order works: groups are delimited by exact score equality
    order_arr = np.argsort(np.asarray(scores)).astype(np.int64)
    cdef int64_t[::1] order = order_arr
    cdef double u = 0.0
    cdef double negatives_below = 0.0
    cdef double n_pos = 0.0, n_neg = 0.0
    cdef double group_pos, group_neg, value
    cdef Py_ssize_t i = 0, j
    while i < n:
        value = scores[order[i]]
        group_pos = 0.0
        group_neg = 0.0
        j = i
        while j < n and scores[order[j]] == value:
            if labels[order[j]]:
                group_pos += 1.0
            else:
                group_neg += 1.0
            j += 1
        u += group_pos * negatives_below + 0.5 * group_pos * group_neg
        negatives_below += group_neg
        n_pos += group_pos
        n_neg += group_neg
        i = j
    return u / (n_pos * n_neg)


def argmax_tie_weights(double[:, ::1] values):
    """Per row, weight 1/k on each of the k row-maximal entries, 0 elsewhere."""
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t m = values.shape[1]
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] weights = out
    cdef Py_ssize_t i, j
    cdef double best
    cdef long count
    for i in range(n):
        best = values[i, 0]
        for j in range(1, m):
            if values[i, j] > best:
                best = values[i, j]
        count = 0
        for j in range(m):
            if values[i, j] == best:
                count += 1
        for j in range(m):
            if values[i, j] == best:
                weights[i, j] = 1.0 / count
    return out
