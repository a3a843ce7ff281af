from __future__ import annotations

from pathlib import Path

import pytest

from bibliorank.corpus import (
    Authorship,
    Corpus,
    DisciplineScheme,
    Institution,
    Publication,
    Researcher,
)
from bibliorank.synth import DEFAULT_DISCIPLINES, SynthConfig, generate

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs"


def build_corpus(
    institutions=("A", "B"),
    researchers=(),
    publications=(),
    authorships=(),
    scheme=None,
    window=(2001, 2003),
) -> Corpus:
    """Small hand-made corpus.

    ``researchers``: (rid, inst, sds[, fte]) with uda = sds prefix before '/'.
    ``publications``: (pid, citations[, year[, category]]).
    ``authorships``: (pid, rid[, position, total]).
    """
    res = []
    for r in researchers:
        rid, inst, sds = r[:3]
        fte = r[3] if len(r) > 3 else 1.0
        res.append(Researcher(rid, inst, sds, sds.split("/")[0], "full", fte))
    pubs = []
    for p in publications:
        pid, cit = p[:2]
        year = p[2] if len(p) > 2 else window[0]
        cat = p[3] if len(p) > 3 else "CAT"
        pubs.append(Publication(pid, year, cat, cit, "article"))
    auths = []
    for a in authorships:
        pid, rid = a[:2]
        pos = a[2] if len(a) > 2 else 1
        tot = a[3] if len(a) > 3 else 1
        auths.append(Authorship(pid, rid, pos, tot))
    if scheme is None:
        scheme = {r.sds: r.uda for r in res}
    return Corpus(
        tuple(Institution(i, f"Inst {i}") for i in institutions),
        tuple(res),
        tuple(pubs),
        tuple(auths),
        DisciplineScheme.from_mapping(scheme),
        *window,
    )


@pytest.fixture
def tiny_corpus() -> Corpus:
    """2 institutions, 3 researchers, 5 publications."""
    return build_corpus(
        institutions=("I1", "I2"),
        researchers=[("R1", "I1", "PHYS/01"), ("R2", "I1", "PHYS/02", 0.5), ("R3", "I2", "PHYS/01")],
        publications=[
            ("P1", 4, 2001, "C1"),
            ("P2", 0, 2001, "C1"),
            ("P3", 2, 2001, "C1"),
            ("P4", 7, 2002, "C2"),
            ("P5", 3, 2002, "C1"),
        ],
        authorships=[
            ("P1", "R1", 1, 2),
            ("P1", "R3", 2, 2),
            ("P2", "R1", 1, 1),
            ("P3", "R2", 1, 3),
            ("P4", "R3", 1, 1),
            ("P5", "R2", 2, 2),
        ],
        window=(2001, 2002),
    )


@pytest.fixture(scope="session")
def default_corpus() -> Corpus:
    return generate(SynthConfig())


@pytest.fixture(scope="session")
def physics_corpus() -> Corpus:
    return generate(SynthConfig(disciplines=DEFAULT_DISCIPLINES[:1], seed=7))


@pytest.fixture(scope="session")
def small_corpus() -> Corpus:
    return generate(
        SynthConfig(n_institutions=8, researchers_per_institution=(3, 6), seed=3)
    )
