"""Robustness and validity analyses of subset-based evaluation.

* sensitivity of institution rankings to the share of output evaluated
* audit of how well institutions pick their best outputs
* concentration of output across researchers
* robustness of rankings to authorship misattribution
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .assessment import (
    AllOutputs,
    EvaluatedSet,
    EvaluationScenario,
    Perfect,
    RankingTable,
    discipline_view,
    evaluate_scenario,
)
from .corpus import Authorship, Corpus
from .indicators import (
    INDICATOR_NAMES,
    PositionWeightScheme,
    indicator_arrays,
    quality_scores,
    score_array,
)


class MismatchedEntities(ValueError):
    pass


class DegenerateInput(ValueError):
    pass


class EmptySelection(ValueError):
    pass


class ZeroTotalOutput(ValueError):
    pass


class InvalidEpsilon(ValueError):
    pass


# ---------------------------------------------------------------------------
# rank comparison


def fractional_ranks(values: Sequence[float], descending: bool = True) -> np.ndarray:
    """Average ranks (1 = best when ``descending``), ties sharing the mean position."""
    vals = np.asarray(values, dtype=np.float64)
    key = -vals if descending else vals
    order = np.argsort(key, kind="stable")
    frac_sorted, _ = kernels.tie_ranks(np.ascontiguousarray(key[order]))
    out = np.empty(vals.shape[0])
    out[order] = frac_sorted
    return out


def rank_correlation(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation of two rank (or score) vectors."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise MismatchedEntities("vectors differ in length")
    if x.shape[0] < 2:
        raise DegenerateInput("need at least two entities")
    if np.array_equal(x, y) and np.ptp(x) > 0:
        return 1.0
    r = kernels.pearson(x, y)
    if math.isnan(r):
        raise DegenerateInput("zero variance in a rank vector")
    return r


def _aligned(a: RankingTable, b: RankingTable, column: str):
    if set(a.institution_ids) != set(b.institution_ids):
        raise MismatchedEntities("rankings cover different institutions")
    ids = sorted(a.institution_ids)
    ra, rb = a._by_id, b._by_id
    return (
        np.array([getattr(ra[i], column) for i in ids], dtype=np.float64),
        np.array([getattr(rb[i], column) for i in ids], dtype=np.float64),
    )


def spearman(a: RankingTable, b: RankingTable, method: str = "spearman") -> float:
    """Rank correlation of two rankings of the same institutions.

    ``method="spearman"`` correlates fractional ranks; ``"pearson"``
    correlates the raw scores instead.
    """
    if method not in ("spearman", "pearson"):
        raise ValueError(f"unknown correlation method {method!r}")
    x, y = _aligned(a, b, "fractional_rank" if method == "spearman" else "score")
    return rank_correlation(x, y)


@dataclass(frozen=True)
class RankShift:
    shifts: Mapping[str, int]
    median: float
    max: int
    n_changed: int
    n_changed_decile: int

    def to_dict(self):
        return {
            "median_abs_rank_shift": self.median,
            "max_abs_rank_shift": self.max,
            "n_changed_rank": self.n_changed,
            "n_changed_decile": self.n_changed_decile,
        }


def rank_shift_stats(benchmark: RankingTable, scenario: RankingTable) -> RankShift:
    if set(benchmark.institution_ids) != set(scenario.institution_ids):
        raise MismatchedEntities("rankings cover different institutions")
    rb, rs = benchmark._by_id, scenario._by_id
    ids = sorted(rb)
    shifts = {i: abs(rs[i].competition_rank - rb[i].competition_rank) for i in ids}
    vals = np.array(list(shifts.values()), dtype=np.float64)
    return RankShift(
        shifts,
        float(np.median(vals)) if len(vals) else 0.0,
        int(vals.max()) if len(vals) else 0,
        int((vals > 0).sum()),
        sum(rs[i].decile != rb[i].decile for i in ids),
    )


# ---------------------------------------------------------------------------
# sensitivity


def decile_frequency_matrix(rankings: Sequence[RankingTable]) -> dict[str, list[float]]:
    """Per institution, percentage of rankings placing it in each decile 1..10."""
    if not rankings:
        return {}
    s = len(rankings)
    counts: dict[str, list[int]] = {i: [0] * 10 for i in rankings[0].institution_ids}
    for table in rankings:
        for row in table.rows:
            counts.setdefault(row.institution_id, [0] * 10)[row.decile - 1] += 1
    return {i: [100.0 * c / s for c in row] for i, row in sorted(counts.items())}


@dataclass(frozen=True)
class ScenarioResult:
    label: str
    policy: dict
    selector: dict
    n_evaluated: int
    share_evaluated: float
    spearman_vs_benchmark: float
    median_abs_rank_shift: float
    max_abs_rank_shift: int
    n_changed_rank: int
    n_changed_decile: int

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class SensitivityReport:
    discipline: str
    benchmark_label: str
    method: str
    results: tuple[ScenarioResult, ...]
    decile_frequency_matrix: Mapping[str, list[float]]
    benchmark: RankingTable = field(repr=False)
    rankings: Mapping[str, RankingTable] = field(repr=False)

    def result(self, label: str) -> ScenarioResult:
        return next(r for r in self.results if r.label == label)

    def to_dict(self):
        return {
            "discipline": self.discipline,
            "benchmark": self.benchmark_label,
            "method": self.method,
            "scenarios": [r.to_dict() for r in self.results],
            "decile_frequency_matrix": {k: list(v) for k, v in self.decile_frequency_matrix.items()},
        }


def sensitivity_run(
    corpus: Corpus,
    scores,
    scenarios: Sequence[EvaluationScenario],
    benchmark_scenario: EvaluationScenario | None = None,
    method: str = "spearman",
) -> SensitivityReport:
    """Compare every scenario's ranking against the all-output benchmark."""
    if not scenarios:
        raise ValueError("sensitivity_run needs at least one scenario")
    disciplines = {s.discipline for s in scenarios}
    if len(disciplines) != 1:
        raise ValueError(f"scenarios span several disciplines: {sorted(disciplines)}")
    discipline = disciplines.pop()
    if benchmark_scenario is None:
        benchmark_scenario = EvaluationScenario(discipline, AllOutputs(), Perfect(), "benchmark")
    if not benchmark_scenario.is_benchmark:
        raise ValueError("benchmark must be AllOutputs with a Perfect selector")
    if benchmark_scenario.discipline != discipline:
        raise ValueError("benchmark discipline differs from the scenarios'")

    q = scores if isinstance(scores, np.ndarray) else score_array(corpus, scores)
    _, bench = evaluate_scenario(corpus, q, benchmark_scenario)
    n_units = discipline_view(corpus, discipline).n_units

    results, rankings = [], {}
    for sc in scenarios:
        evaluated, table = evaluate_scenario(corpus, q, sc)
        rankings[sc.label] = table
        shift = rank_shift_stats(bench, table)
        results.append(
            ScenarioResult(
                sc.label,
                sc.policy.to_dict(),
                sc.selector.to_dict(),
                evaluated.n_evaluated,
                evaluated.n_evaluated / n_units,
                spearman(bench, table, method),
                shift.median,
                shift.max,
                shift.n_changed,
                shift.n_changed_decile,
            )
        )
    return SensitivityReport(
        discipline,
        benchmark_scenario.label,
        method,
        tuple(results),
        decile_frequency_matrix([rankings[s.label] for s in scenarios]),
        bench,
        rankings,
    )


# ---------------------------------------------------------------------------
# selection audit


@dataclass(frozen=True)
class AuditRow:
    institution_id: str
    n_outputs: int
    n_selected: int
    n_below_median: int
    median_q: float
    below_median_share: float | None

    @property
    def flagged(self) -> bool:
        return self.below_median_share is None


@dataclass(frozen=True)
class SelectionAudit:
    discipline: str
    rows: tuple[AuditRow, ...]
    average: float | None
    median: float | None
    max: float | None
    variation_coefficient: float | None

    @property
    def shares(self) -> dict[str, float]:
        return {r.institution_id: r.below_median_share for r in self.rows if not r.flagged}

    @property
    def flagged(self) -> list[str]:
        return [r.institution_id for r in self.rows if r.flagged]

    @property
    def variation_undefined(self) -> bool:
        return self.variation_coefficient is None

    def summary(self) -> dict:
        return {
            "discipline": self.discipline,
            "average": self.average,
            "median": self.median,
            "max": self.max,
            "variation_coefficient": self.variation_coefficient,
            "n_institutions": len(self.shares),
            "n_flagged": len(self.flagged),
        }

    def to_dict(self) -> dict:
        d = self.summary()
        d["institutions"] = [dict(r.__dict__) for r in self.rows]
        return d


def selection_audit(
    corpus: Corpus, scores, evaluated: EvaluatedSet, discipline: str | None = None
) -> SelectionAudit:
    """Share of each institution's selected outputs scoring below the median of its full output.

    The median uses the midpoint convention for an even count; "below" is
    strict.  Institutions with an empty selection are flagged and left out
    of the summary.
    """
    discipline = discipline or evaluated.discipline
    if discipline != evaluated.discipline:
        raise ValueError("evaluated set belongs to another discipline")
    view = discipline_view(corpus, discipline)
    q = scores if isinstance(scores, np.ndarray) else score_array(corpus, scores)

    uq = q[view.unit_pub]
    order = np.lexsort((uq, view.unit_inst))
    starts = np.searchsorted(view.unit_inst[order], np.arange(view.n_inst + 1))
    medians = kernels.segment_medians(starts.astype(np.int64), np.ascontiguousarray(uq[order]))

    sel = evaluated.selected
    n_out = np.bincount(view.unit_inst, minlength=view.n_inst)
    n_sel = np.bincount(view.unit_inst[sel], minlength=view.n_inst)
    n_below = kernels.count_below(
        view.unit_inst[sel], np.ascontiguousarray(uq[sel]), medians, view.n_inst
    )
    rows = []
    for i, iid in enumerate(view.inst_ids):
        share = float(n_below[i] / n_sel[i]) if n_sel[i] else None
        rows.append(
            AuditRow(iid, int(n_out[i]), int(n_sel[i]), int(n_below[i]), float(medians[i]), share)
        )
    vals = np.array([r.below_median_share for r in rows if not r.flagged], dtype=np.float64)
    if vals.size == 0:
        return SelectionAudit(discipline, tuple(rows), None, None, None, None)
    mean = float(vals.mean())
    cv = float(vals.std(ddof=0) / mean) if mean > 0 else None
    return SelectionAudit(
        discipline, tuple(rows), mean, float(np.median(vals)), float(vals.max()), cv
    )


# ---------------------------------------------------------------------------
# concentration


@dataclass(frozen=True)
class ConcentrationResult:
    indicator: str
    researcher_ids: tuple[str, ...]
    values: tuple[float, ...]
    lorenz_points: tuple[tuple[float, float], ...]

    @property
    def n(self) -> int:
        return len(self.researcher_ids)

    def staff_fraction_for(self, share: float) -> float:
        """Smallest fraction of top researchers holding at least ``share`` of output."""
        if share <= 0:
            return 0.0
        for staff, out in self.lorenz_points:
            # tolerance covers float cumulation error, e.g. 0.1 * 7 summed stepwise
            if out >= share - 1e-12:
                return staff
        return 1.0

    def output_share_of_top(self, staff_fraction: float) -> float:
        k = min(self.n, max(0, math.ceil(staff_fraction * self.n - 1e-12)))
        return self.lorenz_points[k][1]


def concentration(
    corpus: Corpus,
    indicator: str = "fractional_count",
    scores=None,
    scheme: PositionWeightScheme | None = None,
) -> ConcentrationResult:
    """Cumulative output share held by the most productive researchers."""
    if indicator not in INDICATOR_NAMES:
        raise ValueError(f"unknown indicator {indicator!r}; choose from {INDICATOR_NAMES}")
    if not corpus.researchers:
        raise ValueError("concentration needs at least one researcher")
    if scores is None:
        q = score_array(corpus, quality_scores(corpus))
    elif isinstance(scores, np.ndarray):
        q = scores
    else:
        q = score_array(corpus, scores)
    values = indicator_arrays(corpus, q, scheme)[indicator]
    total = float(values.sum())
    if total <= 0:
        raise ZeroTotalOutput(f"total {indicator} is zero")
    ids = corpus.index.res_ids
    order = np.lexsort((np.arange(len(ids)), -values))
    cum = np.cumsum(values[order])
    n = len(ids)
    points = [(0.0, 0.0)] + [((k + 1) / n, float(cum[k] / total)) for k in range(n)]
    points[-1] = (1.0, 1.0)
    return ConcentrationResult(
        indicator,
        tuple(ids[i] for i in order),
        tuple(float(values[i]) for i in order),
        tuple(points),
    )


# ---------------------------------------------------------------------------
# attribution noise


@dataclass(frozen=True)
class NoiseReport:
    epsilon: float
    spearman_institution_level: float
    spearman_individual_level: float
    seeds_used: tuple[int, ...]
    per_seed_institution: tuple[float, ...] = ()
    per_seed_individual: tuple[float, ...] = ()
    n_reassigned: tuple[int, ...] = ()
    disciplines: tuple[str, ...] = ()

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "spearman_institution_level": self.spearman_institution_level,
            "spearman_individual_level": self.spearman_individual_level,
            "seeds_used": list(self.seeds_used),
            "per_seed_institution": list(self.per_seed_institution),
            "per_seed_individual": list(self.per_seed_individual),
            "n_reassigned": list(self.n_reassigned),
            "disciplines": list(self.disciplines),
        }


def reassign_authorships(corpus: Corpus, epsilon: float, rng: np.random.Generator):
    """Misattribute each authorship with probability ``epsilon``.

    The new author is drawn uniformly from researchers in the same SDS at a
    different institution who are not already on the byline.  Authorships
    with no eligible replacement are kept.  Returns ``(corpus, n_moved)``.
    """
    idx = corpus.index
    n = idx.auth_res.shape[0]
    hits = np.flatnonzero(rng.random(n) < epsilon)
    if hits.size == 0:
        return corpus, 0
    new_res = idx.auth_res.copy()
    members = {
        s: np.flatnonzero(idx.res_sds == s) for s in np.unique(idx.res_sds[idx.auth_res[hits]])
    }
    # authorships are sorted by pub, so each byline is a contiguous slice
    starts = np.searchsorted(idx.auth_pub, np.arange(idx.n_publications + 1))
    moved = 0
    for h in hits.tolist():
        r = new_res[h]
        pool = members[idx.res_sds[idx.auth_res[h]]]
        p = idx.auth_pub[h]
        byline = new_res[starts[p]:starts[p + 1]]
        ok = (idx.res_inst[pool] != idx.res_inst[r]) & ~np.isin(pool, byline)
        cand = pool[ok]
        if cand.size == 0:
            continue
        new_res[h] = cand[int(rng.integers(cand.size))]
        moved += 1
    res_ids, pub_ids = idx.res_ids, idx.pub_ids
    auths = [
        Authorship(pub_ids[p], res_ids[r], int(pos), int(tot))
        for p, r, pos, tot in zip(
            idx.auth_pub.tolist(), new_res.tolist(), idx.auth_position.tolist(), idx.auth_total.tolist()
        )
    ]
    return corpus.replace_authorships(auths), moved


def _institution_rankings(corpus: Corpus, q: np.ndarray, disciplines) -> dict[str, RankingTable]:
    out = {}
    for d in disciplines:
        sc = EvaluationScenario(d, AllOutputs(), Perfect(), f"{d}_all")
        out[d] = evaluate_scenario(corpus, q, sc)[1]
    return out


def attribution_noise_experiment(
    corpus: Corpus,
    epsilon: float,
    n_seeds: int,
    seed: int = 0,
    disciplines: Sequence[str] | None = None,
    scores=None,
    indicator: str = "quality_weighted",
    method: str = "spearman",
) -> NoiseReport:
    """Rank stability under random authorship misattribution.

    Institution level: mean over disciplines of the correlation between
    clean and noisy all-output rankings.  Individual level: correlation of
    researchers' fractional ranks on ``indicator``.  Both are averaged over
    seeds ``seed, seed + 1, ..., seed + n_seeds - 1``.
    """
    if not (0.0 <= epsilon <= 1.0) or math.isnan(epsilon):
        raise InvalidEpsilon(f"epsilon must be in [0, 1], got {epsilon!r}")
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    if scores is None:
        q = score_array(corpus, quality_scores(corpus))
    elif isinstance(scores, np.ndarray):
        q = scores
    else:
        q = score_array(corpus, scores)

    if disciplines is None:
        disciplines = [
            d for d in corpus.index.udas if discipline_view(corpus, d).n_inst >= 2
            and discipline_view(corpus, d).n_units > 0
        ]
    disciplines = list(disciplines)
    if not disciplines:
        raise DegenerateInput("no discipline with two or more institutions")

    clean_inst = _institution_rankings(corpus, q, disciplines)
    clean_ind = fractional_ranks(indicator_arrays(corpus, q)[indicator])

    seeds = tuple(seed + i for i in range(n_seeds))
    inst_r, ind_r, moved = [], [], []
    for s in seeds:
        noisy, n_moved = reassign_authorships(corpus, epsilon, np.random.default_rng(s))
        moved.append(n_moved)
        tables = _institution_rankings(noisy, q, disciplines)
        inst_r.append(
            float(np.mean([spearman(clean_inst[d], tables[d], method) for d in disciplines]))
        )
        noisy_ind = fractional_ranks(indicator_arrays(noisy, q)[indicator])
        ind_r.append(rank_correlation(clean_ind, noisy_ind))

    return NoiseReport(
        epsilon,
        float(np.mean(inst_r)),
        float(np.mean(ind_r)),
        seeds,
        tuple(inst_r),
        tuple(ind_r),
        tuple(moved),
        tuple(disciplines),
    )
