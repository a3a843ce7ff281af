"""Field-normalized quality scores and per-researcher productivity indicators."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .corpus import Corpus, Publication, write_csv


class MissingBaselineCell(KeyError):
    pass


class InvalidWeights(ValueError):
    pass


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class BaselineCell:
    total: int
    n: int

    @property
    def mean(self) -> float:
        return self.total / self.n


class BaselineTable(dict):
    """Mapping ``(subject_category, year) -> BaselineCell``.

    Cells keep the exact integer citation total and publication count so
    that normalized scores are exact ratios.
    """

    def mean(self, category: str, year: int) -> float:
        return self[(category, year)].mean


def category_year_baselines(corpus: Corpus) -> BaselineTable:
    totals: dict[tuple[str, int], list[int]] = {}
    for p in corpus.publications:
        cell = totals.setdefault((p.subject_category, p.year), [0, 0])
        cell[0] += p.citation_count
        cell[1] += 1
    return BaselineTable(
        {k: BaselineCell(t, n) for k, (t, n) in sorted(totals.items())}
    )


@dataclass(frozen=True)
class QualityScore:
    pub_id: str
    q: float


def _ratio(citations: int, cell: BaselineCell) -> float:
    if cell.total == 0:
        return 0.0
    # citations / (total / n) as one correctly rounded int division, so scaling
    # a whole cell by any integer leaves q bit-identical
    return (citations * cell.n) / cell.total


def normalized_quality(pub: Publication, baselines: Mapping) -> QualityScore:
    try:
        cell = baselines[(pub.subject_category, pub.year)]
    except KeyError:
        raise MissingBaselineCell((pub.subject_category, pub.year)) from None
    return QualityScore(pub.pub_id, _ratio(pub.citation_count, cell))


def quality_scores(corpus: Corpus, baselines: Mapping | None = None) -> dict[str, float]:
    """``pub_id -> q`` for every publication in the corpus."""
    if baselines is None:
        baselines = category_year_baselines(corpus)
    return {p.pub_id: normalized_quality(p, baselines).q for p in corpus.publications}


def score_array(corpus: Corpus, scores: Mapping[str, float]) -> np.ndarray:
    """Scores aligned with ``corpus.index.pub_ids``; nan where a score is missing."""
    return np.array([scores.get(pid, np.nan) for pid in corpus.index.pub_ids], dtype=np.float64)


@dataclass(frozen=True)
class PositionWeightScheme:
    """How credit for a publication is split by byline position.

    ``uniform_fraction`` gives each author 1/total_authors.
    ``first_last_premium`` gives ``w_first`` to the first author, ``w_last``
    to the last, and splits the remainder equally among middle authors.
    """

    variant: str = "uniform_fraction"
    w_first: float = 0.0
    w_last: float = 0.0

    def __post_init__(self):
        if self.variant not in ("uniform_fraction", "first_last_premium"):
            raise InvalidWeights(f"unknown position weight variant {self.variant!r}")
        if self.variant == "first_last_premium":
            if self.w_first < 0 or self.w_last < 0:
                raise InvalidWeights("premium weights must be non-negative")
            if self.w_first + self.w_last > 1.0:
                raise InvalidWeights(f"w_first + w_last = {self.w_first + self.w_last} > 1")

    @classmethod
    def uniform(cls) -> "PositionWeightScheme":
        return cls()

    @classmethod
    def premium(cls, w_first: float, w_last: float) -> "PositionWeightScheme":
        return cls("first_last_premium", w_first, w_last)


def position_weight(position: int, total_authors: int, scheme: PositionWeightScheme) -> float:
    if not (1 <= position <= total_authors):
        raise ValueError(f"position {position} outside 1..{total_authors}")
    if total_authors == 1:
        return 1.0
    if scheme.variant == "uniform_fraction":
        return 1.0 / total_authors
    wf, wl = scheme.w_first, scheme.w_last
    if total_authors == 2:
        # no middle authors to absorb the remainder
        if not np.isclose(wf + wl, 1.0, rtol=0, atol=1e-12):
            raise InvalidWeights(
                f"two-author byline needs w_first + w_last = 1, got {wf + wl}"
            )
        return wf if position == 1 else wl
    if position == 1:
        return wf
    if position == total_authors:
        return wl
    return (1.0 - wf - wl) / (total_authors - 2)


def _position_weights(index, scheme: PositionWeightScheme) -> np.ndarray:
    pos, tot = index.auth_position, index.auth_total
    if scheme.variant == "uniform_fraction":
        w = 1.0 / tot
        w[tot == 1] = 1.0
        return w
    cache: dict[tuple[int, int], float] = {}
    out = np.empty(pos.shape[0], dtype=np.float64)
    for i, key in enumerate(zip(pos.tolist(), tot.tolist())):
        if key not in cache:
            cache[key] = position_weight(key[0], key[1], scheme)
        out[i] = cache[key]
    return out


INDICATOR_NAMES = (
    "p_count",
    "fractional_count",
    "quality_weighted",
    "fractional_quality_weighted",
    "position_weighted",
)


@dataclass(frozen=True)
class ResearcherIndicators:
    researcher_id: str
    p_count: int
    fractional_count: float
    quality_weighted: float
    fractional_quality_weighted: float
    position_weighted: float
    p_count_per_fte_year: float
    fractional_count_per_fte_year: float
    quality_weighted_per_fte_year: float
    fractional_quality_weighted_per_fte_year: float
    position_weighted_per_fte_year: float

    def as_row(self) -> tuple:
        return tuple(getattr(self, f) for f in INDICATOR_COLUMNS)


INDICATOR_COLUMNS = ("researcher_id",) + INDICATOR_NAMES + tuple(
    f"{n}_per_fte_year" for n in INDICATOR_NAMES
)


def indicator_arrays(
    corpus: Corpus,
    q: np.ndarray,
    scheme: PositionWeightScheme | None = None,
) -> dict[str, np.ndarray]:
    """Raw indicator vectors aligned with ``corpus.index.res_ids``.

    ``q`` is aligned with ``corpus.index.pub_ids``.
    """
    scheme = scheme or PositionWeightScheme()
    idx = corpus.index
    n = idx.n_researchers
    res = idx.auth_res
    qa = q[idx.auth_pub]
    if np.isnan(qa).any():
        raise MissingBaselineCell("score missing for an authored publication")
    frac = 1.0 / idx.auth_total
    _, counts = kernels.group_sums(res, frac, n)
    return {
        "p_count": counts.astype(np.float64),
        "fractional_count": kernels.group_sums(res, frac, n)[0],
        "quality_weighted": kernels.group_sums(res, qa, n)[0],
        "fractional_quality_weighted": kernels.group_sums(res, qa * frac, n)[0],
        "position_weighted": kernels.group_sums(res, qa * _position_weights(idx, scheme), n)[0],
    }


def researcher_indicators(
    corpus: Corpus,
    scores: Mapping[str, float],
    scheme: PositionWeightScheme | None = None,
) -> list[ResearcherIndicators]:
    idx = corpus.index
    raw = indicator_arrays(corpus, score_array(corpus, scores), scheme)
    denom = idx.res_fte * corpus.window_years
    rows = []
    for r, rid in enumerate(idx.res_ids):
        vals = [raw[k][r] for k in INDICATOR_NAMES]
        rows.append(
            ResearcherIndicators(
                rid,
                int(vals[0]),
                *(float(v) for v in vals[1:]),
                *(float(v / denom[r]) for v in vals),
            )
        )
    return rows


def percentile_ranks(values: Sequence[float]) -> list[float]:
    """Mid-rank percentiles: 100 * (count below + half the count equal) / n."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("percentile_ranks needs at least one value")
    return kernels.midrank_percentiles(arr).tolist()


def write_scores(path, scores: Mapping[str, float]) -> Path:
    path = Path(path)
    write_csv(path, ("pub_id", "q"), sorted(scores.items()))
    return path


def write_indicators(path, rows: Sequence[ResearcherIndicators]) -> Path:
    path = Path(path)
    write_csv(path, INDICATOR_COLUMNS, (r.as_row() for r in sorted(rows, key=lambda r: r.researcher_id)))
    return path
