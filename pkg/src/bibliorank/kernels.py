"""Backend selection for the numeric kernels.

The compiled extension ``bibliorank._kernels`` is used when it was built;
otherwise the pure-Python module is loaded.  Setting the environment
variable ``BIBLIORANK_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("BIBLIORANK_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

tie_ranks = _impl.tie_ranks
midrank_percentiles = _impl.midrank_percentiles
pearson = _impl.pearson
group_sums = _impl.group_sums
first_k_per_group = _impl.first_k_per_group
segment_medians = _impl.segment_medians
count_below = _impl.count_below

__all__ = [
    "BACKEND",
    "count_below",
    "first_k_per_group",
    "group_sums",
    "midrank_percentiles",
    "pearson",
    "segment_medians",
    "tie_ranks",
]
