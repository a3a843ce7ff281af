"""Pure-Python implementations of the compiled kernels in ``_kernels.pyx``."""

from __future__ import annotations

import math

import numpy as np


def tie_ranks(sorted_keys):
    keys = np.asarray(sorted_keys, dtype=np.float64)
    n = keys.shape[0]
    frac = np.empty(n, dtype=np.float64)
    comp = np.empty(n, dtype=np.int64)
    i = 0
    while i < n:
        j = i + 1
        while j < n and keys[j] == keys[i]:
            j += 1
        frac[i:j] = (i + 1 + j) / 2.0
        comp[i:j] = i + 1
        i = j
    return frac, comp


def midrank_percentiles(values):
    vals = np.asarray(values, dtype=np.float64)
    n = vals.shape[0]
    order = np.argsort(vals, kind="stable")
    out = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i + 1
        while j < n and vals[order[j]] == vals[order[i]]:
            j += 1
        out[order[i:j]] = 100.0 * (i + 0.5 * (j - i)) / n
        i = j
    return out


def pearson(x, y):
    xs = [float(v) for v in x]
    ys = [float(v) for v in y]
    n = len(xs)
    if n == 0:
        return float("nan")
    mx = 0.0
    my = 0.0
    for a, b in zip(xs, ys):
        mx += a
        my += b
    mx /= n
    my /= n
    sxx = syy = sxy = 0.0
    for a, b in zip(xs, ys):
        dx = a - mx
        dy = b - my
        sxx += dx * dx
        syy += dy * dy
        sxy += dx * dy
    if sxx == 0.0 or syy == 0.0:
        return float("nan")
    return sxy / math.sqrt(sxx * syy)


def group_sums(group, values, n_groups):
    sums = np.zeros(n_groups, dtype=np.float64)
    counts = np.zeros(n_groups, dtype=np.int64)
    # sequential accumulation keeps float summation order equal to the compiled loop
    for g, v in zip(np.asarray(group).tolist(), np.asarray(values, dtype=np.float64).tolist()):
        sums[g] += v
        counts[g] += 1
    return sums, counts


def first_k_per_group(group, quota):
    grp = np.asarray(group).tolist()
    quota = np.asarray(quota).tolist()
    mask = np.zeros(len(grp), dtype=np.bool_)
    seen = 0
    current = None
    for i, g in enumerate(grp):
        if g != current:
            current = g
            seen = 0
        if seen < quota[g]:
            mask[i] = True
        seen += 1
    return mask


def segment_medians(starts, sorted_values):
    starts = np.asarray(starts).tolist()
    vals = np.asarray(sorted_values, dtype=np.float64)
    out = np.empty(len(starts) - 1, dtype=np.float64)
    for k in range(len(starts) - 1):
        lo, hi = starts[k], starts[k + 1]
        n = hi - lo
        if n == 0:
            out[k] = math.nan
        elif n % 2 == 1:
            out[k] = vals[lo + n // 2]
        else:
            out[k] = 0.5 * (vals[lo + n // 2 - 1] + vals[lo + n // 2])
    return out


def count_below(group, values, thresholds, n_groups):
    below = np.zeros(n_groups, dtype=np.int64)
    thr = np.asarray(thresholds, dtype=np.float64)
    for g, v in zip(np.asarray(group).tolist(), np.asarray(values, dtype=np.float64).tolist()):
        if v < thr[g]:
            below[g] += 1
    return below
