# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for ranking, grouping and selection.

Every function here has a twin in ``_kernels_py`` with identical signature
and bit-identical output; ``bibliorank.kernels`` picks one at import.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def tie_ranks(const double[:] sorted_keys):
    """Fractional and competition ranks for keys already in rank order.

    Runs of equal keys share the mean of their positions (fractional) and
    the first position of the run (competition).  Positions are 1-based.
    """
    cdef Py_ssize_t n = sorted_keys.shape[0]
    cdef Py_ssize_t i = 0, j, t
    cdef double avg
    frac = np.empty(n, dtype=np.float64)
    comp = np.empty(n, dtype=np.int64)
    cdef double[:] f = frac
    cdef cnp.int64_t[:] c = comp
    while i < n:
        j = i + 1
        while j < n and sorted_keys[j] == sorted_keys[i]:
            j += 1
        # positions i+1 .. j, mean is (i+1+j)/2
        avg = (i + 1 + j) / 2.0
        for t in range(i, j):
            f[t] = avg
            c[t] = i + 1
        i = j
    return frac, comp


def midrank_percentiles(const double[:] values):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t i = 0, j, t
    cdef double pct
    order = np.argsort(np.asarray(values), kind="stable")
    cdef cnp.int64_t[:] o = order.astype(np.int64)
    out = np.empty(n, dtype=np.float64)
    cdef double[:] res = out
    while i < n:
        j = i + 1
        while j < n and values[o[j]] == values[o[i]]:
            j += 1
        # i values strictly below, (j - i) equal
        pct = 100.0 * (i + 0.5 * (j - i)) / n
        for t in range(i, j):
            res[o[t]] = pct
        i = j
    return out


def pearson(const double[:] x, const double[:] y):
    """Pearson correlation; returns nan when either side has zero variance."""
    cdef Py_ssize_t n = x.shape[0], i
    cdef double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0, dx, dy
    if n == 0:
        return float("nan")
    for i in range(n):
        mx += x[i]
        my += y[i]
    mx /= n
    my /= n
    for i in range(n):
        dx = x[i] - mx
        dy = y[i] - my
        sxx += dx * dx
        syy += dy * dy
        sxy += dx * dy
    if sxx == 0.0 or syy == 0.0:
        return float("nan")
    return sxy / sqrt(sxx * syy)


def group_sums(const cnp.int64_t[:] group, const double[:] values, Py_ssize_t n_groups):
    cdef Py_ssize_t n = group.shape[0], i
    sums = np.zeros(n_groups, dtype=np.float64)
    counts = np.zeros(n_groups, dtype=np.int64)
    cdef double[:] s = sums
    cdef cnp.int64_t[:] c = counts
    for i in range(n):
        s[group[i]] += values[i]
        c[group[i]] += 1
    return sums, counts


def first_k_per_group(const cnp.int64_t[:] group, const cnp.int64_t[:] quota):
    """Mask the first ``quota[g]`` items of each contiguous run of group ``g``."""
    cdef Py_ssize_t n = group.shape[0], i
    cdef cnp.int64_t seen = 0, g = -1
    mask = np.zeros(n, dtype=np.bool_)
    cdef cnp.npy_bool[:] m = mask
    for i in range(n):
        if group[i] != g:
            g = group[i]
            seen = 0
        if seen < quota[g]:
            m[i] = 1
        seen += 1
    return mask


def segment_medians(const cnp.int64_t[:] starts, const double[:] sorted_values):
    """Median of each segment ``sorted_values[starts[k]:starts[k+1]]``.

    Values must be ascending within a segment; even-length segments take
    the midpoint of the two central values.  Empty segments give nan.
    """
    cdef Py_ssize_t k, m = starts.shape[0] - 1, lo, n
    out = np.empty(m, dtype=np.float64)
    cdef double[:] res = out
    for k in range(m):
        lo = starts[k]
        n = starts[k + 1] - lo
        if n == 0:
            res[k] = float("nan")
        elif n % 2 == 1:
            res[k] = sorted_values[lo + n // 2]
        else:
            res[k] = 0.5 * (sorted_values[lo + n // 2 - 1] + sorted_values[lo + n // 2])
    return out


def count_below(const cnp.int64_t[:] group, const double[:] values,
                const double[:] thresholds, Py_ssize_t n_groups):
    cdef Py_ssize_t n = group.shape[0], i
    below = np.zeros(n_groups, dtype=np.int64)
    cdef cnp.int64_t[:] b = below
    for i in range(n):
        if values[i] < thresholds[group[i]]:
            b[group[i]] += 1
    return below
