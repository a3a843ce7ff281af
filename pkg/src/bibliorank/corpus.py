"""Corpus data model: institutions, researchers, publications, authorships.

A :class:`Corpus` is immutable and canonical: entity collections are stored
sorted by key, so two corpora built from the same rows in any order compare
equal.  Integer-indexed numpy views used by the numeric code are built once
on first access (:attr:`Corpus.index`).
"""

from __future__ import annotations

import csv
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

ACADEMIC_RANKS = ("full", "associate", "assistant")
DOC_TYPES = ("article", "review", "proceedings")

FILES = {
    "institutions": ("institutions.csv", ("institution_id", "name")),
    "researchers": (
        "researchers.csv",
        ("researcher_id", "institution_id", "sds", "uda", "academic_rank", "fte"),
    ),
    "publications": (
        "publications.csv",
        ("pub_id", "year", "subject_category", "citation_count", "doc_type"),
    ),
    "authorships": (
        "authorships.csv",
        ("pub_id", "researcher_id", "author_position", "total_authors"),
    ),
    "scheme": ("scheme.csv", ("sds", "uda")),
}
# optional; when absent the window is inferred from publication years
WINDOW_FILE = ("window.csv", ("year_min", "year_max"))


class CorpusError(Exception):
    """Base class for corpus loading failures."""


class MissingFile(CorpusError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"missing corpus file: {self.path}")


class SchemaViolation(CorpusError):
    def __init__(self, file, row, column, message):
        self.file = file
        self.row = row
        self.column = column
        super().__init__(f"{file}: row {row}, column {column!r}: {message}")


class DanglingReference(CorpusError):
    def __init__(self, entity, key, detail=""):
        self.entity = entity
        self.key = key
        super().__init__(f"{entity} {key!r} does not resolve" + (f" ({detail})" if detail else ""))


class DuplicateKey(CorpusError):
    def __init__(self, entity, key):
        self.entity = entity
        self.key = key
        super().__init__(f"duplicate {entity} key {key!r}")


@dataclass(frozen=True)
class Institution:
    institution_id: str
    name: str


@dataclass(frozen=True)
class Researcher:
    researcher_id: str
    institution_id: str
    sds: str
    uda: str
    academic_rank: str
    fte: float


@dataclass(frozen=True)
class Publication:
    pub_id: str
    year: int
    subject_category: str
    citation_count: int
    doc_type: str


@dataclass(frozen=True)
class Authorship:
    pub_id: str
    researcher_id: str
    author_position: int
    total_authors: int


@dataclass(frozen=True)
class DisciplineScheme:
    """SDS -> UDA mapping, stored as sorted pairs."""

    pairs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(sorted(tuple(p) for p in self.pairs)))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "DisciplineScheme":
        return cls(tuple(mapping.items()))

    @cached_property
    def sds_to_uda(self) -> dict[str, str]:
        return dict(self.pairs)

    def uda_of(self, sds: str) -> str | None:
        return self.sds_to_uda.get(sds)

    @property
    def udas(self) -> tuple[str, ...]:
        return tuple(sorted({u for _, u in self.pairs}))


def _sorted(items, key):
    return tuple(sorted(items, key=key))


@dataclass(frozen=True)
class Corpus:
    institutions: tuple[Institution, ...]
    researchers: tuple[Researcher, ...]
    publications: tuple[Publication, ...]
    authorships: tuple[Authorship, ...]
    scheme: DisciplineScheme
    year_min: int
    year_max: int

    def __post_init__(self):
        object.__setattr__(self, "institutions", _sorted(self.institutions, lambda i: i.institution_id))
        object.__setattr__(self, "researchers", _sorted(self.researchers, lambda r: r.researcher_id))
        object.__setattr__(
            self, "publications", _sorted(self.publications, lambda p: (p.pub_id, p.year))
        )
        object.__setattr__(
            self,
            "authorships",
            _sorted(self.authorships, lambda a: (a.pub_id, a.researcher_id, a.author_position)),
        )
        if not isinstance(self.scheme, DisciplineScheme):
            object.__setattr__(self, "scheme", DisciplineScheme.from_mapping(self.scheme))

    @property
    def window_years(self) -> int:
        return self.year_max - self.year_min + 1

    @cached_property
    def index(self) -> "CorpusIndex":
        return CorpusIndex(self)

    @cached_property
    def cache(self) -> dict:
        """Per-instance memo for derived views; never part of equality."""
        return {}

    def replace_authorships(self, authorships: Iterable[Authorship]) -> "Corpus":
        return Corpus(
            self.institutions,
            self.researchers,
            self.publications,
            tuple(authorships),
            self.scheme,
            self.year_min,
            self.year_max,
        )


class CorpusIndex:
    """Integer-coded array views of a corpus whose references all resolve.

    Entities are numbered in key order: ``inst_ids[i]``, ``res_ids[r]``,
    ``pub_ids[p]``.  Authorship arrays are parallel and sorted by
    (pub, researcher).
    """

    def __init__(self, corpus: Corpus):
        self.inst_ids = [i.institution_id for i in corpus.institutions]
        self.res_ids = [r.researcher_id for r in corpus.researchers]
        self.pub_ids = [p.pub_id for p in corpus.publications]
        self.inst_pos = {k: i for i, k in enumerate(self.inst_ids)}
        self.res_pos = {k: i for i, k in enumerate(self.res_ids)}
        self.pub_pos = {k: i for i, k in enumerate(self.pub_ids)}
        for entity, ids, pos in (
            ("institution", self.inst_ids, self.inst_pos),
            ("researcher", self.res_ids, self.res_pos),
            ("publication", self.pub_ids, self.pub_pos),
        ):
            if len(pos) != len(ids):
                dup = next(k for k, c in Counter(ids).items() if c > 1)
                raise DuplicateKey(entity, dup)

        self.udas = sorted(set(corpus.scheme.udas) | {r.uda for r in corpus.researchers})
        self.uda_pos = {u: i for i, u in enumerate(self.udas)}
        self.sdss = sorted(set(corpus.scheme.sds_to_uda) | {r.sds for r in corpus.researchers})
        self.sds_pos = {s: i for i, s in enumerate(self.sdss)}
        self.categories = sorted({p.subject_category for p in corpus.publications})
        self.cat_pos = {c: i for i, c in enumerate(self.categories)}

        try:
            self.res_inst = np.array(
                [self.inst_pos[r.institution_id] for r in corpus.researchers], dtype=np.int64
            )
        except KeyError as exc:
            raise DanglingReference("institution", exc.args[0]) from None
        self.res_uda = np.array([self.uda_pos[r.uda] for r in corpus.researchers], dtype=np.int64)
        self.res_sds = np.array([self.sds_pos[r.sds] for r in corpus.researchers], dtype=np.int64)
        self.res_fte = np.array([r.fte for r in corpus.researchers], dtype=np.float64)

        self.pub_year = np.array([p.year for p in corpus.publications], dtype=np.int64)
        self.pub_cat = np.array(
            [self.cat_pos[p.subject_category] for p in corpus.publications], dtype=np.int64
        )
        self.pub_cit = np.array([p.citation_count for p in corpus.publications], dtype=np.int64)

        auth = corpus.authorships
        try:
            self.auth_pub = np.array([self.pub_pos[a.pub_id] for a in auth], dtype=np.int64)
        except KeyError as exc:
            raise DanglingReference("publication", exc.args[0]) from None
        try:
            self.auth_res = np.array([self.res_pos[a.researcher_id] for a in auth], dtype=np.int64)
        except KeyError as exc:
            raise DanglingReference("researcher", exc.args[0]) from None
        self.auth_position = np.array([a.author_position for a in auth], dtype=np.int64)
        self.auth_total = np.array([a.total_authors for a in auth], dtype=np.int64)

    @property
    def n_institutions(self) -> int:
        return len(self.inst_ids)

    @property
    def n_researchers(self) -> int:
        return len(self.res_ids)

    @property
    def n_publications(self) -> int:
        return len(self.pub_ids)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Finding:
    kind: str
    entity: str
    key: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "entity": self.entity, "key": self.key, "detail": self.detail}


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = ()

    def __len__(self):
        return len(self.findings)

    def __iter__(self):
        return iter(self.findings)

    @property
    def ok(self) -> bool:
        return not self.findings

    def kinds(self) -> Counter:
        return Counter(f.kind for f in self.findings)

    def to_dict(self) -> dict:
        return {"valid": self.ok, "n_findings": len(self.findings),
                "findings": [f.to_dict() for f in self.findings]}


def validate(corpus: Corpus) -> ValidationReport:
    """Check every corpus invariant; violations are returned, never raised."""
    out: list[Finding] = []
    add = out.append

    if corpus.year_min > corpus.year_max:
        add(Finding("EmptyWindow", "corpus", "", f"{corpus.year_min}>{corpus.year_max}"))

    for entity, keys in (
        ("institution", [i.institution_id for i in corpus.institutions]),
        ("researcher", [r.researcher_id for r in corpus.researchers]),
        ("publication", [p.pub_id for p in corpus.publications]),
    ):
        for k, c in sorted(Counter(keys).items()):
            if not k:
                add(Finding("EmptyKey", entity, k))
            if c > 1:
                add(Finding("DuplicateKey", entity, k, f"{c} rows"))

    sds_map = corpus.scheme.sds_to_uda
    inst_ids = {i.institution_id for i in corpus.institutions}
    for r in corpus.researchers:
        if r.institution_id not in inst_ids:
            add(Finding("DanglingReference", "researcher", r.researcher_id,
                        f"institution {r.institution_id!r}"))
        if r.sds not in sds_map:
            add(Finding("UnknownSds", "researcher", r.researcher_id, r.sds))
        elif sds_map[r.sds] != r.uda:
            add(Finding("UdaMismatch", "researcher", r.researcher_id,
                        f"{r.sds} maps to {sds_map[r.sds]}, row says {r.uda}"))
        if r.academic_rank not in ACADEMIC_RANKS:
            add(Finding("InvalidRank", "researcher", r.researcher_id, r.academic_rank))
        if not (0.0 < r.fte <= 1.0):
            add(Finding("InvalidFte", "researcher", r.researcher_id, repr(r.fte)))

    for p in corpus.publications:
        if p.citation_count < 0:
            add(Finding("NegativeCitations", "publication", p.pub_id, str(p.citation_count)))
        if not (corpus.year_min <= p.year <= corpus.year_max):
            add(Finding("WindowViolation", "publication", p.pub_id,
                        f"{p.year} not in [{corpus.year_min}, {corpus.year_max}]"))
        if p.doc_type not in DOC_TYPES:
            add(Finding("InvalidDocType", "publication", p.pub_id, p.doc_type))

    pub_ids = {p.pub_id for p in corpus.publications}
    res_ids = {r.researcher_id for r in corpus.researchers}
    by_pub: dict[str, list[Authorship]] = defaultdict(list)
    pair_counts = Counter((a.pub_id, a.researcher_id) for a in corpus.authorships)
    for (pid, rid), c in sorted(pair_counts.items()):
        if c > 1:
            add(Finding("DuplicateAuthorship", "authorship", f"{pid}|{rid}", f"{c} rows"))
    for a in corpus.authorships:
        key = f"{a.pub_id}|{a.researcher_id}"
        if a.pub_id not in pub_ids:
            add(Finding("DanglingReference", "authorship", key, f"publication {a.pub_id!r}"))
        if a.researcher_id not in res_ids:
            add(Finding("DanglingReference", "authorship", key, f"researcher {a.researcher_id!r}"))
        if not (1 <= a.author_position <= a.total_authors):
            add(Finding("PositionOutOfRange", "authorship", key,
                        f"position {a.author_position} of {a.total_authors}"))
        by_pub[a.pub_id].append(a)

    for pid in sorted(by_pub):
        rows = by_pub[pid]
        totals = {a.total_authors for a in rows}
        if len(totals) > 1:
            add(Finding("InconsistentTotalAuthors", "publication", pid, str(sorted(totals))))
        elif len(rows) > min(totals):
            add(Finding("TooManyAuthors", "publication", pid,
                        f"{len(rows)} corpus authors > total_authors {min(totals)}"))
        positions = Counter(a.author_position for a in rows)
        for pos, c in sorted(positions.items()):
            if c > 1:
                add(Finding("DuplicatePosition", "publication", pid, f"position {pos}"))

    return ValidationReport(tuple(out))


def raise_for_findings(report: ValidationReport) -> None:
    if report.ok:
        return
    f = report.findings[0]
    if f.kind == "DuplicateKey":
        raise DuplicateKey(f.entity, f.key)
    if f.kind == "DanglingReference":
        raise DanglingReference(f.entity, f.key, f.detail)
    raise SchemaViolation(f.entity, f.key, f.kind, f.detail)


# ---------------------------------------------------------------------------
# CSV I/O


def _resolve_paths(paths) -> dict[str, Path]:
    if isinstance(paths, (str, os.PathLike)):
        root = Path(paths)
        if root.is_dir():
            return {name: root / fname for name, (fname, _) in FILES.items()} | {
                "window": root / WINDOW_FILE[0]
            }
        paths = [root]
    if isinstance(paths, Mapping):
        return {k: Path(v) for k, v in paths.items()}
    by_name = {fname: name for name, (fname, _) in FILES.items()}
    by_name[WINDOW_FILE[0]] = "window"
    out = {}
    for p in paths:
        p = Path(p)
        if p.name not in by_name:
            raise SchemaViolation(p.name, None, None, "unrecognised corpus file name")
        out[by_name[p.name]] = p
    return out


def _read_rows(path: Path, columns: tuple[str, ...]):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaViolation(path.name, 1, missing[0], "column missing from header")
        for lineno, row in enumerate(reader, start=2):
            if None in row or any(row[c] is None for c in columns):
                raise SchemaViolation(path.name, lineno, None, "wrong number of fields")
            yield lineno, row


def _int(fname, lineno, col, raw, minimum=None):
    try:
        val = int(raw.strip())
    except ValueError:
        raise SchemaViolation(fname, lineno, col, f"not an integer: {raw!r}") from None
    if minimum is not None and val < minimum:
        raise SchemaViolation(fname, lineno, col, f"must be >= {minimum}, got {val}")
    return val


def _key(fname, lineno, col, raw):
    val = raw.strip()
    if not val:
        raise SchemaViolation(fname, lineno, col, "empty key")
    return val


def _enum(fname, lineno, col, raw, allowed):
    val = raw.strip()
    if val not in allowed:
        raise SchemaViolation(fname, lineno, col, f"{val!r} not in {allowed}")
    return val


def read_corpus(paths) -> Corpus:
    """Parse corpus files, enforcing only row-level schema rules.

    Cross-entity invariants (references, duplicates, window) are left for
    :func:`validate`.
    """
    resolved = _resolve_paths(paths)
    for name, (fname, _) in FILES.items():
        if name not in resolved or not resolved[name].is_file():
            raise MissingFile(resolved.get(name, fname))

    fn = FILES["institutions"][0]
    institutions = [
        Institution(_key(fn, ln, "institution_id", row["institution_id"]), row["name"])
        for ln, row in _read_rows(resolved["institutions"], FILES["institutions"][1])
    ]

    fn = FILES["researchers"][0]
    researchers = []
    for ln, row in _read_rows(resolved["researchers"], FILES["researchers"][1]):
        try:
            fte = float(row["fte"])
        except ValueError:
            raise SchemaViolation(fn, ln, "fte", f"not a number: {row['fte']!r}") from None
        if not (0.0 < fte <= 1.0):
            raise SchemaViolation(fn, ln, "fte", f"must be in (0, 1], got {fte}")
        researchers.append(
            Researcher(
                _key(fn, ln, "researcher_id", row["researcher_id"]),
                _key(fn, ln, "institution_id", row["institution_id"]),
                _key(fn, ln, "sds", row["sds"]),
                _key(fn, ln, "uda", row["uda"]),
                _enum(fn, ln, "academic_rank", row["academic_rank"], ACADEMIC_RANKS),
                fte,
            )
        )

    fn = FILES["publications"][0]
    publications = [
        Publication(
            _key(fn, ln, "pub_id", row["pub_id"]),
            _int(fn, ln, "year", row["year"]),
            _key(fn, ln, "subject_category", row["subject_category"]),
            _int(fn, ln, "citation_count", row["citation_count"], minimum=0),
            _enum(fn, ln, "doc_type", row["doc_type"], DOC_TYPES),
        )
        for ln, row in _read_rows(resolved["publications"], FILES["publications"][1])
    ]

    fn = FILES["authorships"][0]
    authorships = []
    for ln, row in _read_rows(resolved["authorships"], FILES["authorships"][1]):
        pos = _int(fn, ln, "author_position", row["author_position"], minimum=1)
        total = _int(fn, ln, "total_authors", row["total_authors"], minimum=1)
        if total < pos:
            raise SchemaViolation(fn, ln, "total_authors", f"{total} < author_position {pos}")
        authorships.append(
            Authorship(
                _key(fn, ln, "pub_id", row["pub_id"]),
                _key(fn, ln, "researcher_id", row["researcher_id"]),
                pos,
                total,
            )
        )

    fn = FILES["scheme"][0]
    scheme: dict[str, str] = {}
    for ln, row in _read_rows(resolved["scheme"], FILES["scheme"][1]):
        sds = _key(fn, ln, "sds", row["sds"])
        uda = _key(fn, ln, "uda", row["uda"])
        if sds in scheme and scheme[sds] != uda:
            raise SchemaViolation(fn, ln, "uda", f"sds {sds!r} mapped to two UDAs")
        scheme[sds] = uda

    window = resolved.get("window")
    if window is not None and window.is_file():
        rows = list(_read_rows(window, WINDOW_FILE[1]))
        if len(rows) != 1:
            raise SchemaViolation(WINDOW_FILE[0], 2, None, "expected exactly one data row")
        ln, row = rows[0]
        year_min = _int(WINDOW_FILE[0], ln, "year_min", row["year_min"])
        year_max = _int(WINDOW_FILE[0], ln, "year_max", row["year_max"])
    elif publications:
        year_min = min(p.year for p in publications)
        year_max = max(p.year for p in publications)
    else:
        raise SchemaViolation(WINDOW_FILE[0], None, None,
                              "no window file and no publications to infer it from")

    return Corpus(
        tuple(institutions),
        tuple(researchers),
        tuple(publications),
        tuple(authorships),
        DisciplineScheme.from_mapping(scheme),
        year_min,
        year_max,
    )


def load_corpus(paths) -> Corpus:
    """Load and fully validate a corpus.

    ``paths`` is a directory holding the CSV files, a mapping from logical
    name (``institutions``, ``researchers``, ...) to path, or an iterable of
    file paths recognised by file name.

    Raises MissingFile, SchemaViolation, DanglingReference or DuplicateKey.
    """
    corpus = read_corpus(paths)
    raise_for_findings(validate(corpus))
    return corpus


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_corpus(corpus: Corpus, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    tables = {
        "institutions": [(i.institution_id, i.name) for i in corpus.institutions],
        "researchers": [
            (r.researcher_id, r.institution_id, r.sds, r.uda, r.academic_rank, r.fte)
            for r in corpus.researchers
        ],
        "publications": [
            (p.pub_id, p.year, p.subject_category, p.citation_count, p.doc_type)
            for p in corpus.publications
        ],
        "authorships": [
            (a.pub_id, a.researcher_id, a.author_position, a.total_authors)
            for a in corpus.authorships
        ],
        "scheme": list(corpus.scheme.pairs),
    }
    for name, rows in tables.items():
        fname, header = FILES[name]
        write_csv(out / fname, header, rows)
        written[name] = out / fname
    write_csv(out / WINDOW_FILE[0], WINDOW_FILE[1], [(corpus.year_min, corpus.year_max)])
    written["window"] = out / WINDOW_FILE[0]
    return written


# ---------------------------------------------------------------------------
# summary


@dataclass(frozen=True)
class CorpusStats:
    n_institutions: int = 0
    n_researchers: int = 0
    n_publications: int = 0
    n_authorships: int = 0
    researchers_per_uda: dict = field(default_factory=dict)
    researchers_per_institution: dict = field(default_factory=dict)
    publications_per_uda: dict = field(default_factory=dict)
    publications_per_cell: dict = field(default_factory=dict)
    pubs_per_researcher_histogram: dict = field(default_factory=dict)
    pubs_per_researcher_mean: float = 0.0
    pubs_per_researcher_max: int = 0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["publications_per_cell"] = {
            f"{c}|{y}": n for (c, y), n in self.publications_per_cell.items()
        }
        return d


def corpus_stats(corpus: Corpus) -> CorpusStats:
    res_uda = {r.researcher_id: r.uda for r in corpus.researchers}
    pubs_of = Counter(a.researcher_id for a in corpus.authorships)
    per_res = [pubs_of.get(r.researcher_id, 0) for r in corpus.researchers]
    pub_udas: dict[str, set] = defaultdict(set)
    for a in corpus.authorships:
        if a.researcher_id in res_uda:
            pub_udas[a.pub_id].add(res_uda[a.researcher_id])
    per_uda = Counter(u for udas in pub_udas.values() for u in udas)
    cells = Counter((p.subject_category, p.year) for p in corpus.publications)
    return CorpusStats(
        n_institutions=len(corpus.institutions),
        n_researchers=len(corpus.researchers),
        n_publications=len(corpus.publications),
        n_authorships=len(corpus.authorships),
        researchers_per_uda=dict(sorted(Counter(r.uda for r in corpus.researchers).items())),
        researchers_per_institution=dict(
            sorted(Counter(r.institution_id for r in corpus.researchers).items())
        ),
        publications_per_uda=dict(sorted(per_uda.items())),
        publications_per_cell=dict(sorted(cells.items())),
        pubs_per_researcher_histogram=dict(sorted(Counter(per_res).items())),
        pubs_per_researcher_mean=(sum(per_res) / len(per_res)) if per_res else 0.0,
        pubs_per_researcher_max=max(per_res, default=0),
    )
