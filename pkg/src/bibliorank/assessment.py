"""Evaluation policies, institution scoring and rankings.

A publication belongs to discipline ``d`` when at least one corpus author
has ``uda == d``.  Within a discipline the unit of evaluation is the pair
(institution, publication): a paper co-authored by two institutions counts
once for each of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .corpus import Corpus, write_csv
from .indicators import score_array

# absorbs binary representation error in share * count products (0.09 * 100 = 9.000000000000002)
_ROUND_EPS = 1e-9


class EmptyDiscipline(ValueError):
    pass


class InvalidPolicy(ValueError):
    pass


# ---------------------------------------------------------------------------
# policies and scenarios


@dataclass(frozen=True)
class AllOutputs:
    type = "all_outputs"

    def to_dict(self):
        return {"type": self.type}


@dataclass(frozen=True)
class BestKPerResearcher:
    k: int
    type = "best_k_per_researcher"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InvalidPolicy(f"k must be an integer >= 1, got {self.k!r}")

    def to_dict(self):
        return {"type": self.type, "param": self.k}


@dataclass(frozen=True)
class InstitutionFteQuota:
    f: float
    type = "institution_fte_quota"

    def __post_init__(self):
        if not (0.0 < self.f <= 1.0):
            raise InvalidPolicy(f"FTE quota must be in (0, 1], got {self.f!r}")

    def to_dict(self):
        return {"type": self.type, "param": self.f}


@dataclass(frozen=True)
class ShareOfDisciplineOutput:
    s: float
    type = "share_of_discipline_output"

    def __post_init__(self):
        if not (0.0 < self.s <= 1.0):
            raise InvalidPolicy(f"share must be in (0, 1], got {self.s!r}")

    def to_dict(self):
        return {"type": self.type, "param": self.s}


SelectionPolicy = AllOutputs | BestKPerResearcher | InstitutionFteQuota | ShareOfDisciplineOutput


@dataclass(frozen=True)
class Perfect:
    type = "perfect"

    def to_dict(self):
        return {"type": self.type}


@dataclass(frozen=True)
class Noisy:
    p_swap: float
    seed: int = 0
    type = "noisy"

    def __post_init__(self):
        if not (0.0 <= self.p_swap <= 1.0):
            raise InvalidPolicy(f"p_swap must be in [0, 1], got {self.p_swap!r}")

    def to_dict(self):
        return {"type": self.type, "p_swap": self.p_swap, "seed": self.seed}


SelectorModel = Perfect | Noisy


@dataclass(frozen=True)
class EvaluationScenario:
    discipline: str
    policy: SelectionPolicy = field(default_factory=AllOutputs)
    selector: SelectorModel = field(default_factory=Perfect)
    label: str = ""

    def __post_init__(self):
        if not self.label:
            object.__setattr__(self, "label", default_label(self.discipline, self.policy))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "discipline": self.discipline,
            "policy": self.policy.to_dict(),
            "selector": self.selector.to_dict(),
        }

    @property
    def is_benchmark(self) -> bool:
        return isinstance(self.policy, AllOutputs) and isinstance(self.selector, Perfect)


def default_label(discipline: str, policy) -> str:
    param = policy.to_dict().get("param")
    return f"{discipline}_{policy.type}" + ("" if param is None else f"_{param:g}")


_POLICY_ALIASES = {
    "all_outputs": AllOutputs,
    "alloutputs": AllOutputs,
    "best_k_per_researcher": BestKPerResearcher,
    "bestkperresearcher": BestKPerResearcher,
    "best_k": BestKPerResearcher,
    "institution_fte_quota": InstitutionFteQuota,
    "institutionftequota": InstitutionFteQuota,
    "fte_quota": InstitutionFteQuota,
    "share_of_discipline_output": ShareOfDisciplineOutput,
    "shareofdisciplineoutput": ShareOfDisciplineOutput,
    "share": ShareOfDisciplineOutput,
}


def parse_policy(obj: Mapping) -> SelectionPolicy:
    kind = str(obj.get("type", "")).lower()
    cls = _POLICY_ALIASES.get(kind)
    if cls is None:
        raise InvalidPolicy(f"unknown policy type {obj.get('type')!r}")
    if cls is AllOutputs:
        return AllOutputs()
    if "param" not in obj:
        raise InvalidPolicy(f"policy {kind!r} needs a 'param'")
    param = obj["param"]
    if cls is BestKPerResearcher:
        if isinstance(param, bool) or not isinstance(param, int):
            raise InvalidPolicy(f"k must be an integer, got {param!r}")
        return cls(param)
    return cls(float(param))


def parse_selector(obj: Mapping | None) -> SelectorModel:
    if not obj:
        return Perfect()
    kind = str(obj.get("type", "perfect")).lower()
    if kind == "perfect":
        return Perfect()
    if kind == "noisy":
        return Noisy(float(obj.get("p_swap", 0.0)), int(obj.get("seed", 0)))
    raise InvalidPolicy(f"unknown selector type {obj.get('type')!r}")


def parse_scenario(obj: Mapping) -> EvaluationScenario:
    if "discipline" not in obj:
        raise InvalidPolicy("scenario needs a 'discipline'")
    return EvaluationScenario(
        discipline=str(obj["discipline"]),
        policy=parse_policy(obj.get("policy", {"type": "all_outputs"})),
        selector=parse_selector(obj.get("selector")),
        label=str(obj.get("label", "")),
    )


def parse_scenarios(items: Sequence[Mapping]) -> list[EvaluationScenario]:
    scenarios = [parse_scenario(o) for o in items]
    labels = [s.label for s in scenarios]
    dup = {l for l in labels if labels.count(l) > 1}
    if dup:
        raise InvalidPolicy(f"duplicate scenario labels: {sorted(dup)}")
    return scenarios


# ---------------------------------------------------------------------------
# discipline views


class DisciplineView:
    """Integer-coded outputs of one discipline.

    ``inst_ids`` are the institutions with staff in the discipline (sorted).
    Units are (institution, publication) pairs; ``rp_*`` arrays are the
    researcher-publication pairs of the discipline's researchers.
    """

    def __init__(self, corpus: Corpus, discipline: str):
        idx = corpus.index
        if discipline not in idx.uda_pos:
            raise EmptyDiscipline(f"discipline {discipline!r} is not in the scheme")
        self.discipline = discipline
        d = idx.uda_pos[discipline]
        in_d = idx.res_uda == d
        inst_global = np.unique(idx.res_inst[in_d])
        self.inst_global = inst_global
        self.inst_ids = [idx.inst_ids[i] for i in inst_global]
        local = np.full(idx.n_institutions, -1, dtype=np.int64)
        local[inst_global] = np.arange(inst_global.shape[0])
        self.n_inst = inst_global.shape[0]
        self.inst_fte = np.bincount(
            local[idx.res_inst[in_d]], weights=idx.res_fte[in_d], minlength=self.n_inst
        )

        amask = in_d[idx.auth_res]
        self.rp_res = idx.auth_res[amask]
        self.rp_pub = idx.auth_pub[amask]
        self.rp_inst = local[idx.res_inst[self.rp_res]]

        n_pub = idx.n_publications
        code = np.unique(self.rp_inst * n_pub + self.rp_pub)
        self.unit_inst = code // n_pub
        self.unit_pub = code % n_pub
        self.pubs = np.unique(self.rp_pub)
        self.n_pub_total = n_pub

    @property
    def n_units(self) -> int:
        return self.unit_inst.shape[0]


def discipline_view(corpus: Corpus, discipline: str) -> DisciplineView:
    key = ("discipline_view", discipline)
    if key not in corpus.cache:
        corpus.cache[key] = DisciplineView(corpus, discipline)
    return corpus.cache[key]


# ---------------------------------------------------------------------------
# selection


@dataclass(frozen=True)
class EvaluatedSet:
    """Outputs chosen for evaluation in one discipline.

    ``by_institution`` maps every institution with staff in the discipline
    to the sorted pub_ids evaluated for it (possibly empty).
    """

    discipline: str
    by_institution: Mapping[str, tuple[str, ...]]
    unit_inst: np.ndarray = field(repr=False, compare=False)
    unit_pub: np.ndarray = field(repr=False, compare=False)
    selected: np.ndarray = field(repr=False, compare=False)
    inst_ids: tuple[str, ...] = field(repr=False, compare=False, default=())

    @property
    def n_evaluated(self) -> int:
        return int(self.selected.sum())

    def pubs(self) -> set[str]:
        return {p for ps in self.by_institution.values() for p in ps}


def _rank_order(group: np.ndarray, q: np.ndarray, pub: np.ndarray) -> np.ndarray:
    """Order by group ascending, then q descending, then pub index (= pub_id) ascending."""
    return np.lexsort((pub, -q, group))


def _apply_noise(group_sorted, selected_sorted, selector: Noisy) -> np.ndarray:
    """Swap each selected slot, with probability p_swap, for an unselected item of its group."""
    rng = np.random.default_rng(selector.seed)
    out = selected_sorted.copy()
    n = group_sorted.shape[0]
    starts = np.flatnonzero(np.r_[True, group_sorted[1:] != group_sorted[:-1]]) if n else []
    bounds = list(starts) + [n]
    for a, b in zip(bounds[:-1], bounds[1:]):
        chosen = [i for i in range(a, b) if selected_sorted[i]]
        pool = [i for i in range(a, b) if not selected_sorted[i]]
        for slot in chosen:
            if rng.random() < selector.p_swap and pool:
                j = int(rng.integers(len(pool)))
                out[slot] = False
                out[pool.pop(j)] = True
    return out


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + _ROUND_EPS))


def select_mask(view: DisciplineView, q: np.ndarray, scenario: EvaluationScenario) -> np.ndarray:
    """Boolean mask over ``view``'s units."""
    policy, selector = scenario.policy, scenario.selector
    noisy = isinstance(selector, Noisy) and selector.p_swap > 0

    if isinstance(policy, AllOutputs):
        return np.ones(view.n_units, dtype=bool)

    if isinstance(policy, BestKPerResearcher):
        order = _rank_order(view.rp_res, q[view.rp_pub], view.rp_pub)
        grp = view.rp_res[order]
        quota = np.full(int(grp.max()) + 1 if grp.size else 0, policy.k, dtype=np.int64)
        picked = kernels.first_k_per_group(grp, quota)
        if noisy:
            picked = _apply_noise(grp, picked, selector)
        chosen = order[picked]
        codes = view.rp_inst[chosen] * view.n_pub_total + view.rp_pub[chosen]
        unit_codes = view.unit_inst * view.n_pub_total + view.unit_pub
        return np.isin(unit_codes, codes)

    if isinstance(policy, InstitutionFteQuota):
        order = _rank_order(view.unit_inst, q[view.unit_pub], view.unit_pub)
        grp = view.unit_inst[order]
        available = np.bincount(view.unit_inst, minlength=view.n_inst)
        quota = np.array(
            [
                min(int(n), max(1, _round_half_up(policy.f * fte))) if n else 0
                for n, fte in zip(available, view.inst_fte)
            ],
            dtype=np.int64,
        )
        picked = kernels.first_k_per_group(grp, quota)
        if noisy:
            picked = _apply_noise(grp, picked, selector)
        mask = np.zeros(view.n_units, dtype=bool)
        mask[order[picked]] = True
        return mask

    if isinstance(policy, ShareOfDisciplineOutput):
        pubs = view.pubs
        order = _rank_order(np.zeros_like(pubs), q[pubs], pubs)
        n_take = min(len(pubs), math.ceil(policy.s * len(pubs) - _ROUND_EPS))
        picked = np.zeros(len(pubs), dtype=bool)
        picked[:n_take] = True
        if noisy:
            picked = _apply_noise(np.zeros(len(pubs), dtype=np.int64), picked, selector)
        return np.isin(view.unit_pub, pubs[order[picked]])

    raise InvalidPolicy(f"unsupported policy {policy!r}")


def policy_count(view: DisciplineView, q: np.ndarray, policy) -> int:
    """Number of (institution, publication) units a policy evaluates under Perfect selection."""
    return int(select_mask(view, q, EvaluationScenario(view.discipline, policy, Perfect())).sum())


def select_outputs(
    corpus: Corpus, scores: Mapping[str, float], scenario: EvaluationScenario
) -> EvaluatedSet:
    view = discipline_view(corpus, scenario.discipline)
    if view.n_units == 0:
        raise EmptyDiscipline(f"discipline {scenario.discipline!r} has no outputs")
    q = scores if isinstance(scores, np.ndarray) else score_array(corpus, scores)
    if np.isnan(q[view.unit_pub]).any():
        raise KeyError("scores do not cover every publication of the discipline")
    mask = select_mask(view, q, scenario)
    pub_ids = corpus.index.pub_ids
    by_inst: dict[str, list[str]] = {i: [] for i in view.inst_ids}
    for inst, pub in zip(view.unit_inst[mask].tolist(), view.unit_pub[mask].tolist()):
        by_inst[view.inst_ids[inst]].append(pub_ids[pub])
    return EvaluatedSet(
        scenario.discipline,
        {k: tuple(v) for k, v in by_inst.items()},
        view.unit_inst,
        view.unit_pub,
        mask,
        tuple(view.inst_ids),
    )


# ---------------------------------------------------------------------------
# scoring and ranking


@dataclass(frozen=True)
class InstitutionScore:
    institution_id: str
    score: float
    n_outputs_evaluated: int
    flagged: bool = False


def score_institutions(evaluated: EvaluatedSet, scores) -> list[InstitutionScore]:
    """Mean q over each institution's evaluated outputs.

    Institutions with nothing evaluated score 0 and are flagged.
    ``scores`` is a ``pub_id -> q`` mapping or an array aligned with the
    corpus publication index.
    """
    if isinstance(scores, np.ndarray) and evaluated.inst_ids:
        sel = evaluated.selected
        sums, counts = kernels.group_sums(
            evaluated.unit_inst[sel], scores[evaluated.unit_pub[sel]], len(evaluated.inst_ids)
        )
        return [
            InstitutionScore(iid, float(s / c) if c else 0.0, int(c), not c)
            for iid, s, c in zip(evaluated.inst_ids, sums.tolist(), counts.tolist())
        ]
    out = []
    for iid in sorted(evaluated.by_institution):
        qs = [scores[p] for p in evaluated.by_institution[iid]]
        total = 0.0
        for v in qs:
            total += v
        out.append(InstitutionScore(iid, total / len(qs) if qs else 0.0, len(qs), not qs))
    return out


@dataclass(frozen=True)
class RankingRow:
    institution_id: str
    score: float
    fractional_rank: float
    competition_rank: int
    decile: int
    percentile: float
    n_outputs_evaluated: int | None = None
    flagged: bool = False


RANKING_COLUMNS = (
    "institution_id",
    "score",
    "fractional_rank",
    "competition_rank",
    "decile",
    "percentile",
    "n_outputs_evaluated",
    "flagged",
)


@dataclass(frozen=True)
class RankingTable:
    """Institution ranking; ``rows`` are sorted by institution_id."""

    rows: tuple[RankingRow, ...]
    label: str = ""

    def __len__(self):
        return len(self.rows)

    @property
    def institution_ids(self) -> tuple[str, ...]:
        return tuple(r.institution_id for r in self.rows)

    def row(self, institution_id: str) -> RankingRow:
        return self._by_id[institution_id]

    @cached_property
    def _by_id(self):
        return {r.institution_id: r for r in self.rows}

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def by_rank(self) -> list[RankingRow]:
        return sorted(self.rows, key=lambda r: (r.competition_rank, r.institution_id))

    def to_records(self) -> list[dict]:
        return [{c: getattr(r, c) for c in RANKING_COLUMNS} for r in self.by_rank()]

    def write_csv(self, path) -> Path:
        path = Path(path)
        write_csv(
            path,
            RANKING_COLUMNS,
            (
                tuple("" if getattr(r, c) is None else getattr(r, c) for c in RANKING_COLUMNS)
                for r in self.by_rank()
            ),
        )
        return path


def decile_of(competition_rank: int, n: int) -> int:
    return min(10, max(1, -(-10 * competition_rank // n)))


def rank_institutions(scores, label: str = "") -> RankingTable:
    """Rank institutions by descending score.

    ``scores`` is a sequence of :class:`InstitutionScore` or a plain
    ``institution_id -> score`` mapping.  Flagged (nothing evaluated)
    institutions rank after every unflagged one.
    """
    if isinstance(scores, Mapping):
        items = [InstitutionScore(k, float(v), None) for k, v in scores.items()]
    else:
        items = list(scores)
    if not items:
        raise ValueError("rank_institutions needs at least one institution")
    items.sort(key=lambda s: s.institution_id)
    n = len(items)
    score = np.array([s.score for s in items], dtype=np.float64)
    key = np.where([s.flagged for s in items], -np.inf, score)
    order = np.lexsort((np.arange(n), -key))
    frac_sorted, comp_sorted = kernels.tie_ranks(np.ascontiguousarray(key[order]))
    frac = np.empty(n)
    comp = np.empty(n, dtype=np.int64)
    frac[order] = frac_sorted
    comp[order] = comp_sorted
    pct = kernels.midrank_percentiles(score)
    rows = tuple(
        RankingRow(
            s.institution_id,
            float(s.score),
            float(frac[i]),
            int(comp[i]),
            decile_of(int(comp[i]), n),
            float(pct[i]),
            s.n_outputs_evaluated,
            bool(s.flagged),
        )
        for i, s in enumerate(items)
    )
    return RankingTable(rows, label)


def evaluate_scenario(corpus: Corpus, scores, scenario: EvaluationScenario):
    """Select, score and rank one scenario.  Returns ``(evaluated, ranking)``."""
    q = scores if isinstance(scores, np.ndarray) else score_array(corpus, scores)
    evaluated = select_outputs(corpus, q, scenario)
    return evaluated, rank_institutions(score_institutions(evaluated, q), scenario.label)


# ---------------------------------------------------------------------------
# aggregation


def staff_by_discipline(corpus: Corpus, weight: str = "fte") -> dict[str, dict[str, float]]:
    """``institution_id -> {uda: staff}``, staff as summed FTE or headcount."""
    out: dict[str, dict[str, float]] = {}
    for r in corpus.researchers:
        per = out.setdefault(r.institution_id, {})
        per[r.uda] = per.get(r.uda, 0.0) + (r.fte if weight == "fte" else 1.0)
    return {k: dict(sorted(v.items())) for k, v in sorted(out.items())}


def aggregate_university(
    tables: Mapping[str, RankingTable], staff: Mapping[str, Mapping[str, float]], label: str = "overall"
) -> RankingTable:
    """Size-weighted mean of per-discipline percentiles, then ranked.

    Only disciplines where the university has positive staff and appears
    in that discipline's table contribute.
    """
    for uda, table in tables.items():
        if not len(table):
            raise ValueError(f"ranking table for {uda!r} is empty")
    overall = {}
    for inst in sorted(staff):
        parts = [
            (s, tables[uda].row(inst).percentile)
            for uda, s in sorted(staff[inst].items())
            if s > 0 and uda in tables and inst in tables[uda]._by_id
        ]
        total = sum(s for s, _ in parts)
        if total > 0:
            overall[inst] = sum(s / total * p for s, p in parts)
    return rank_institutions(overall, label)
