"""The compiled kernels and their pure-Python twins must agree bit for bit."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bibliorank import _kernels_py, kernels

try:
    from bibliorank import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")

small_floats = st.lists(
    st.sampled_from([0.0, 0.5, 1.0, 1.5, 2.0, 3.25, 7.0]) | st.floats(0, 100, allow_nan=False),
    min_size=0,
    max_size=40,
)


def brute_tie_ranks(keys):
    frac, comp = [], []
    for i, k in enumerate(keys):
        same = [j for j, v in enumerate(keys) if v == k]
        frac.append(sum(j + 1 for j in same) / len(same))
        comp.append(min(same) + 1)
    return frac, comp


@given(small_floats)
def test_tie_ranks_matches_enumeration(values):
    keys = np.sort(np.array(values, dtype=np.float64))[::-1].copy()
    frac, comp = _kernels_py.tie_ranks(keys)
    bf, bc = brute_tie_ranks(keys.tolist())
    assert frac.tolist() == bf
    assert comp.tolist() == bc


@given(small_floats.filter(len))
def test_midrank_percentiles_matches_formula(values):
    out = _kernels_py.midrank_percentiles(np.array(values))
    n = len(values)
    for v, p in zip(values, out):
        below = sum(x < v for x in values)
        eq = sum(x == v for x in values)
        assert p == 100.0 * (below + 0.5 * eq) / n


def test_first_k_per_group():
    group = np.array([0, 0, 0, 1, 1, 2], dtype=np.int64)
    quota = np.array([2, 0, 5], dtype=np.int64)
    assert _kernels_py.first_k_per_group(group, quota).tolist() == [True, True, False, False, False, True]


def test_segment_medians():
    starts = np.array([0, 3, 3, 7], dtype=np.int64)
    vals = np.array([1.0, 2.0, 9.0, 0.1, 0.5, 1.0, 2.0])
    out = _kernels_py.segment_medians(starts, vals)
    assert out[0] == 2.0
    assert np.isnan(out[1])
    assert out[2] == 0.75


def test_pearson_degenerate_is_nan():
    assert np.isnan(_kernels_py.pearson(np.ones(4), np.arange(4.0)))


def test_backend_is_reported():
    assert kernels.BACKEND in ("compiled", "python")


@needs_compiled
@settings(max_examples=200)
@given(small_floats, st.randoms(use_true_random=False))
def test_compiled_matches_python(values, rnd):
    x = np.array(values, dtype=np.float64)
    keys = np.sort(x)[::-1].copy()
    for a, b in zip(compiled.tie_ranks(keys), _kernels_py.tie_ranks(keys)):
        assert np.array_equal(a, b)
    if len(x):
        assert np.array_equal(compiled.midrank_percentiles(x), _kernels_py.midrank_percentiles(x))
    y = np.array([rnd.random() for _ in values], dtype=np.float64)
    a, b = compiled.pearson(x, y), _kernels_py.pearson(x, y)
    assert (np.isnan(a) and np.isnan(b)) or a == b

    n_groups = 4
    group = np.sort(np.array([rnd.randrange(n_groups) for _ in values], dtype=np.int64))
    for a, b in zip(compiled.group_sums(group, x, n_groups), _kernels_py.group_sums(group, x, n_groups)):
        assert np.array_equal(a, b)
    quota = np.array([rnd.randrange(4) for _ in range(n_groups)], dtype=np.int64)
    assert np.array_equal(
        compiled.first_k_per_group(group, quota), _kernels_py.first_k_per_group(group, quota)
    )
    thr = np.array([rnd.random() * 10 for _ in range(n_groups)])
    assert np.array_equal(
        compiled.count_below(group, x, thr, n_groups), _kernels_py.count_below(group, x, thr, n_groups)
    )
    order = np.lexsort((x, group))
    starts = np.searchsorted(group[order], np.arange(n_groups + 1)).astype(np.int64)
    a = compiled.segment_medians(starts, x[order].copy())
    b = _kernels_py.segment_medians(starts, x[order].copy())
    assert np.array_equal(a, b, equal_nan=True)


def test_benchmark_script_runs():
    import json
    import subprocess
    import sys
    from pathlib import Path

    script = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    proc = subprocess.run(
        [sys.executable, str(script), "--n", "500", "--groups", "10", "--repeat", "1", "--kernels", "--json"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    rows = json.loads(proc.stdout)["kernels"]
    assert {r["kernel"] for r in rows} == {
        "tie_ranks", "midrank_percentiles", "pearson", "group_sums",
        "first_k_per_group", "segment_medians", "count_below",
    }
