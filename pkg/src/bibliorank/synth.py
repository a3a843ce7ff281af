"""Seeded generator of synthetic national publication corpora.

Every random draw comes from a stream keyed by (entity class, institution
number) under the master seed, so appending institutions never perturbs
the draws of existing ones, and output is independent of host and threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus import (
    ACADEMIC_RANKS,
    DOC_TYPES,
    Authorship,
    Corpus,
    DisciplineScheme,
    Institution,
    Publication,
    Researcher,
)


class InvalidConfig(ValueError):
    pass


# stream identifiers; never renumber, that would change every corpus
STREAM_STAFF = 1
STREAM_OUTPUT = 2
STREAM_COAUTHORS = 3
STREAM_CITATIONS = 4


@dataclass(frozen=True)
class DisciplineSpec:
    uda: str
    sds: tuple[str, ...]
    categories: tuple[str, ...]
    weight: float = 1.0


@dataclass(frozen=True)
class SkewParams:
    """Lognormal with the given mean; ``dispersion`` is the log-scale sigma."""

    mean: float
    dispersion: float


@dataclass(frozen=True)
class CoauthorParams:
    mean_extra_authors: float = 3.0  # Poisson mean of total_authors - 1
    internal_share: float = 0.3  # chance an extra author is a corpus researcher
    cross_institution_share: float = 0.25  # chance an internal coauthor is from elsewhere


DEFAULT_DISCIPLINES = (
    DisciplineSpec(
        "PHYS",
        ("FIS/01", "FIS/02", "FIS/03", "FIS/04"),
        ("PHYS-APPLIED", "PHYS-CONDENSED", "PHYS-PARTICLES", "PHYS-MULTIDISC"),
    ),
    DisciplineSpec(
        "BIO",
        ("BIO/09", "BIO/10", "BIO/11", "BIO/13"),
        ("BIOCHEM", "CELL-BIOLOGY", "PHYSIOLOGY", "GENETICS", "PHYS-MULTIDISC"),
    ),
)

DEFAULT_CATEGORY_CITATIONS = {
    "PHYS-APPLIED": SkewParams(6.0, 1.0),
    "PHYS-CONDENSED": SkewParams(10.0, 1.0),
    "PHYS-PARTICLES": SkewParams(14.0, 1.1),
    "PHYS-MULTIDISC": SkewParams(8.0, 1.0),
    "BIOCHEM": SkewParams(16.0, 1.0),
    "CELL-BIOLOGY": SkewParams(24.0, 1.1),
    "PHYSIOLOGY": SkewParams(9.0, 0.9),
    "GENETICS": SkewParams(20.0, 1.1),
}


@dataclass(frozen=True)
class SynthConfig:
    n_institutions: int = 50
    researchers_per_institution: tuple[int, int] = (20, 20)
    disciplines: tuple[DisciplineSpec, ...] = DEFAULT_DISCIPLINES
    pubs_per_researcher: SkewParams = SkewParams(5.0, 1.8)
    citations: SkewParams = SkewParams(10.0, 1.0)
    category_citations: Mapping[str, SkewParams] = field(
        default_factory=lambda: dict(DEFAULT_CATEGORY_CITATIONS)
    )
    coauthors: CoauthorParams = CoauthorParams()
    institution_effect: float = 0.35
    researcher_effect: float = 0.5
    fte_levels: tuple[tuple[float, float], ...] = ((1.0, 0.9), (0.5, 0.1))
    rank_weights: tuple[float, float, float] = (0.3, 0.35, 0.35)
    doc_type_weights: tuple[float, float, float] = (0.75, 0.05, 0.2)
    window: tuple[int, int] = (2001, 2003)
    seed: int = 42

    def __post_init__(self):
        check_config(self)

    def citation_params(self, category: str) -> SkewParams:
        return self.category_citations.get(category, self.citations)

    def replace(self, **changes) -> "SynthConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return SynthConfig(**d)

    # -- JSON ------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n_institutions": self.n_institutions,
            "researchers_per_institution": list(self.researchers_per_institution),
            "disciplines": [
                {"uda": d.uda, "sds": list(d.sds), "categories": list(d.categories), "weight": d.weight}
                for d in self.disciplines
            ],
            "pubs_per_researcher": asdict(self.pubs_per_researcher),
            "citations": {
                "default": asdict(self.citations),
                "per_category": {k: asdict(v) for k, v in sorted(self.category_citations.items())},
            },
            "coauthors": asdict(self.coauthors),
            "institution_effect": self.institution_effect,
            "researcher_effect": self.researcher_effect,
            "fte_levels": [list(x) for x in self.fte_levels],
            "rank_weights": dict(zip(ACADEMIC_RANKS, self.rank_weights)),
            "doc_type_weights": dict(zip(DOC_TYPES, self.doc_type_weights)),
            "window": list(self.window),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        kw: dict = {}
        try:
            for key in ("n_institutions", "seed"):
                if key in obj:
                    kw[key] = _as_int(obj[key], key)
            for key in ("institution_effect", "researcher_effect"):
                if key in obj:
                    kw[key] = float(obj[key])
            if "researchers_per_institution" in obj:
                r = obj["researchers_per_institution"]
                if isinstance(r, (int, float)):
                    r = [r, r]
                kw["researchers_per_institution"] = tuple(_as_int(v, "researchers_per_institution") for v in r)
            if "window" in obj:
                kw["window"] = tuple(_as_int(v, "window") for v in obj["window"])
            if "disciplines" in obj:
                kw["disciplines"] = tuple(
                    DisciplineSpec(
                        str(d["uda"]),
                        tuple(str(s) for s in d["sds"]),
                        tuple(str(c) for c in d["categories"]),
                        float(d.get("weight", 1.0)),
                    )
                    for d in obj["disciplines"]
                )
            if "pubs_per_researcher" in obj:
                kw["pubs_per_researcher"] = SkewParams(**obj["pubs_per_researcher"])
            if "citations" in obj:
                c = obj["citations"]
                if "default" in c:
                    kw["citations"] = SkewParams(**c["default"])
                if "per_category" in c:
                    kw["category_citations"] = {
                        k: SkewParams(**v) for k, v in c["per_category"].items()
                    }
            if "category_citations" in obj:
                kw["category_citations"] = {
                    k: SkewParams(**v) for k, v in obj["category_citations"].items()
                }
            if "coauthors" in obj:
                kw["coauthors"] = CoauthorParams(**obj["coauthors"])
            if "fte_levels" in obj:
                kw["fte_levels"] = tuple((float(a), float(b)) for a, b in obj["fte_levels"])
            if "rank_weights" in obj:
                kw["rank_weights"] = _weights(obj["rank_weights"], ACADEMIC_RANKS)
            if "doc_type_weights" in obj:
                kw["doc_type_weights"] = _weights(obj["doc_type_weights"], DOC_TYPES)
        except (TypeError, KeyError, ValueError) as exc:
            if isinstance(exc, InvalidConfig):
                raise
            raise InvalidConfig(f"malformed config: {exc}") from None
        return cls(**kw)


def _as_int(v, name) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise InvalidConfig(f"{name} must be an integer, got {v!r}")
    return int(v)


def _weights(obj, names) -> tuple[float, ...]:
    if isinstance(obj, Mapping):
        extra = set(obj) - set(names)
        if extra:
            raise InvalidConfig(f"unknown weight keys {sorted(extra)}")
        return tuple(float(obj.get(n, 0.0)) for n in names)
    vals = tuple(float(v) for v in obj)
    if len(vals) != len(names):
        raise InvalidConfig(f"expected {len(names)} weights")
    return vals


def check_config(cfg: SynthConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise InvalidConfig(msg)

    need(cfg.n_institutions >= 1, "n_institutions must be >= 1")
    lo, hi = cfg.researchers_per_institution
    need(1 <= lo <= hi, f"researchers_per_institution must satisfy 1 <= lo <= hi, got {lo}, {hi}")
    need(len(cfg.disciplines) >= 1, "at least one discipline is required")
    seen_sds: set[str] = set()
    for d in cfg.disciplines:
        need(bool(d.uda), "discipline uda must be non-empty")
        need(len(d.sds) >= 1 and len(d.categories) >= 1, f"discipline {d.uda} needs sds and categories")
        need(d.weight > 0, f"discipline {d.uda} weight must be positive")
        need(not (set(d.sds) & seen_sds), f"sds listed under two disciplines: {set(d.sds) & seen_sds}")
        seen_sds |= set(d.sds)
    for name, p in [("pubs_per_researcher", cfg.pubs_per_researcher), ("citations", cfg.citations)] + [
        (f"citations[{k}]", v) for k, v in cfg.category_citations.items()
    ]:
        need(p.mean > 0 and math.isfinite(p.mean), f"{name}.mean must be positive")
        need(p.dispersion >= 0 and math.isfinite(p.dispersion), f"{name}.dispersion must be >= 0")
    c = cfg.coauthors
    need(c.mean_extra_authors >= 0, "coauthors.mean_extra_authors must be >= 0")
    need(0 <= c.internal_share <= 1, "coauthors.internal_share must be in [0, 1]")
    need(0 <= c.cross_institution_share <= 1, "coauthors.cross_institution_share must be in [0, 1]")
    need(cfg.institution_effect >= 0 and cfg.researcher_effect >= 0, "effects must be >= 0")
    need(len(cfg.fte_levels) >= 1, "fte_levels must be non-empty")
    for level, w in cfg.fte_levels:
        need(0 < level <= 1, f"fte level {level} outside (0, 1]")
        need(w >= 0, "fte weights must be >= 0")
    for name, ws in (("fte_levels", [w for _, w in cfg.fte_levels]),
                     ("rank_weights", cfg.rank_weights),
                     ("doc_type_weights", cfg.doc_type_weights)):
        need(all(w >= 0 for w in ws) and sum(ws) > 0, f"{name} must be non-negative with positive sum")
    need(cfg.window[0] <= cfg.window[1], "window must satisfy year_min <= year_max")
    need(0 <= cfg.seed < 2**64, "seed must be a 64-bit unsigned integer")


def load_synth_config(path) -> SynthConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(obj, Mapping):
        raise InvalidConfig(f"{path}: top level must be an object")
    return SynthConfig.from_dict(obj)


def stream(seed: int, kind: int, unit: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(kind, unit)))


def _probs(ws) -> np.ndarray:
    w = np.asarray(ws, dtype=np.float64)
    return w / w.sum()


def _lognormal(rng: np.random.Generator, p: SkewParams, scale: float = 1.0, size=None):
    # mu chosen so the draw has mean p.mean * scale
    mu = math.log(p.mean * scale) - 0.5 * p.dispersion**2
    return rng.lognormal(mu, p.dispersion, size)


def generate(config: SynthConfig) -> Corpus:
    """Build a valid synthetic corpus; a pure function of ``config``."""
    cfg = config
    disc_p = _probs([d.weight for d in cfg.disciplines])
    fte_vals = [lvl for lvl, _ in cfg.fte_levels]
    fte_p = _probs([w for _, w in cfg.fte_levels])
    rank_p = _probs(cfg.rank_weights)
    doc_p = _probs(cfg.doc_type_weights)
    year_lo, year_hi = cfg.window

    institutions = []
    researchers: list[Researcher] = []
    res_disc: list[int] = []
    res_effect: list[float] = []
    inst_effect: list[float] = []
    inst_members: list[list[int]] = []

    for i in range(cfg.n_institutions):
        rng = stream(cfg.seed, STREAM_STAFF, i)
        iid = f"I{i:04d}"
        institutions.append(Institution(iid, f"Institution {i:04d}"))
        inst_effect.append(float(np.exp(rng.normal(0.0, cfg.institution_effect))))
        n_res = int(rng.integers(cfg.researchers_per_institution[0], cfg.researchers_per_institution[1] + 1))
        members = []
        for j in range(n_res):
            d = int(rng.choice(len(cfg.disciplines), p=disc_p))
            spec = cfg.disciplines[d]
            sds = spec.sds[int(rng.integers(len(spec.sds)))]
            rank = ACADEMIC_RANKS[int(rng.choice(3, p=rank_p))]
            fte = fte_vals[int(rng.choice(len(fte_vals), p=fte_p))]
            members.append(len(researchers))
            researchers.append(Researcher(f"R{i:04d}-{j:03d}", iid, sds, spec.uda, rank, fte))
            res_disc.append(d)
            res_effect.append(float(np.exp(rng.normal(0.0, cfg.researcher_effect))))
        inst_members.append(members)

    res_inst = np.array([int(r.institution_id[1:]) for r in researchers], dtype=np.int64)
    res_disc_arr = np.array(res_disc, dtype=np.int64)
    by_disc = [np.flatnonzero(res_disc_arr == d) for d in range(len(cfg.disciplines))]

    publications: list[Publication] = []
    authorships: list[Authorship] = []
    co = cfg.coauthors
    for i in range(cfg.n_institutions):
        out_rng = stream(cfg.seed, STREAM_OUTPUT, i)
        co_rng = stream(cfg.seed, STREAM_COAUTHORS, i)
        cit_rng = stream(cfg.seed, STREAM_CITATIONS, i)
        for r in inst_members[i]:
            lead = researchers[r]
            spec = cfg.disciplines[res_disc[r]]
            n_pubs = int(np.rint(_lognormal(out_rng, cfg.pubs_per_researcher)))
            same = [m for m in inst_members[i] if res_disc[m] == res_disc[r]]
            for k in range(n_pubs):
                pid = f"P{lead.researcher_id[1:]}-{k:03d}"
                year = int(out_rng.integers(year_lo, year_hi + 1))
                cat = spec.categories[int(out_rng.integers(len(spec.categories)))]
                doc = DOC_TYPES[int(out_rng.choice(3, p=doc_p))]
                total = 1 + int(co_rng.poisson(co.mean_extra_authors))

                authors = [r]
                for _ in range(total - 1):
                    if co_rng.random() >= co.internal_share:
                        continue  # external coauthor, only counted in total
                    if co_rng.random() < co.cross_institution_share:
                        pool = by_disc[res_disc[r]]
                        pool = pool[res_inst[pool] != i]
                    else:
                        pool = same
                    if len(pool) == 0:
                        continue
                    cand = int(pool[int(co_rng.integers(len(pool)))])
                    if cand not in authors:
                        authors.append(cand)
                positions = co_rng.permutation(total)[: len(authors)] + 1
                for a, pos in zip(authors, positions.tolist()):
                    authorships.append(Authorship(pid, researchers[a].researcher_id, pos, total))

                scale = inst_effect[i] * res_effect[r]
                cites = int(math.floor(_lognormal(cit_rng, cfg.citation_params(cat), scale)))
                publications.append(Publication(pid, year, cat, cites, doc))

    scheme = DisciplineScheme.from_mapping({s: d.uda for d in cfg.disciplines for s in d.sds})
    return Corpus(
        tuple(institutions),
        tuple(researchers),
        tuple(publications),
        tuple(authorships),
        scheme,
        year_lo,
        year_hi,
    )
