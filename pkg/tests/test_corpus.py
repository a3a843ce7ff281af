import csv
import dataclasses
import random
import shutil

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from bibliorank.corpus import (
    Authorship,
    Corpus,
    DanglingReference,
    DisciplineScheme,
    DuplicateKey,
    MissingFile,
    Publication,
    Researcher,
    SchemaViolation,
    corpus_stats,
    load_corpus,
    read_corpus,
    validate,
    write_corpus,
)

from conftest import build_corpus


def _rewrite(path, mutate):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = mutate(rows)
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


# ---------------------------------------------------------------- loading


def test_load_reports_cardinalities(tiny_corpus, tmp_path):
    write_corpus(tiny_corpus, tmp_path)
    c = load_corpus(tmp_path)
    assert (len(c.institutions), len(c.researchers), len(c.publications)) == (2, 3, 5)


def test_load_without_window_file_infers_window(tiny_corpus, tmp_path):
    write_corpus(tiny_corpus, tmp_path)
    (tmp_path / "window.csv").unlink()
    c = load_corpus(tmp_path)
    assert (c.year_min, c.year_max) == (2001, 2002)


def test_load_accepts_file_list(tiny_corpus, tmp_path):
    paths = write_corpus(tiny_corpus, tmp_path)
    assert load_corpus(list(paths.values())) == tiny_corpus


def test_dangling_publication_reference(tiny_corpus, tmp_path):
    write_corpus(tiny_corpus, tmp_path)
    _rewrite(tmp_path / "authorships.csv", lambda rows: rows + [["P9", "R1", "1", "1"]])
    with pytest.raises(DanglingReference) as exc:
        load_corpus(tmp_path)
    assert "P9" in str(exc.value)


def test_zero_fte_is_schema_violation(tiny_corpus, tmp_path):
    write_corpus(tiny_corpus, tmp_path)

    def zero(rows):
        rows[1][-1] = "0"
        return rows

    _rewrite(tmp_path / "researchers.csv", zero)
    with pytest.raises(SchemaViolation) as exc:
        load_corpus(tmp_path)
    assert exc.value.column == "fte"


def test_missing_file(tiny_corpus, tmp_path):
    write_corpus(tiny_corpus, tmp_path)
    (tmp_path / "scheme.csv").unlink()
    with pytest.raises(MissingFile):
        load_corpus(tmp_path)


def test_duplicate_key_raises(tiny_corpus, tmp_path):
    write_corpus(tiny_corpus, tmp_path)
    _rewrite(tmp_path / "institutions.csv", lambda rows: rows + [rows[1]])
    with pytest.raises(DuplicateKey):
        load_corpus(tmp_path)


@pytest.mark.parametrize(
    "fname,col,value",
    [
        ("publications.csv", 4, "letter"),
        ("publications.csv", 3, "-1"),
        ("publications.csv", 1, "two thousand"),
        ("researchers.csv", 4, "emeritus"),
        ("researchers.csv", 5, "1.5"),
        ("authorships.csv", 2, "0"),
        ("authorships.csv", 3, "0"),
        ("institutions.csv", 0, ""),
    ],
)
def test_row_level_schema_errors(tiny_corpus, tmp_path, fname, col, value):
    write_corpus(tiny_corpus, tmp_path)

    def bad(rows):
        rows[1][col] = value
        return rows

    _rewrite(tmp_path / fname, bad)
    with pytest.raises(SchemaViolation):
        read_corpus(tmp_path)


def test_missing_column_is_schema_violation(tiny_corpus, tmp_path):
    write_corpus(tiny_corpus, tmp_path)
    _rewrite(tmp_path / "scheme.csv", lambda rows: [[r[0]] for r in rows])
    with pytest.raises(SchemaViolation):
        read_corpus(tmp_path)


# ------------------------------------------------------------- validation


def test_valid_corpus_has_empty_report(tiny_corpus):
    report = validate(tiny_corpus)
    assert report.ok and len(report) == 0


def _with(corpus, **changes):
    return dataclasses.replace(corpus, **changes)


def _kinds(corpus):
    return dict(validate(corpus).kinds())


def test_duplicate_authorship_single_finding(tiny_corpus):
    c = _with(tiny_corpus, authorships=tiny_corpus.authorships + (Authorship("P2", "R1", 1, 1),))
    kinds = _kinds(c)
    assert kinds.get("DuplicateAuthorship") == 1


def test_window_violation_single_finding(tiny_corpus):
    pubs = tiny_corpus.publications + (Publication("P6", 1999, "C1", 1, "article"),)
    assert _kinds(_with(tiny_corpus, publications=pubs)) == {"WindowViolation": 1}


def _mutations(c):
    r0 = c.researchers[0]
    p0 = c.publications[0]
    a = c.authorships
    return {
        "EmptyWindow": _with(c, year_min=2005, year_max=2004),
        "DuplicateKey": _with(c, institutions=c.institutions + (c.institutions[0],)),
        "EmptyKey": _with(c, publications=c.publications + (dataclasses.replace(p0, pub_id=""),)),
        "DanglingReference": _with(
            c, researchers=c.researchers + (dataclasses.replace(r0, researcher_id="RX", institution_id="IX"),)
        ),
        "UnknownSds": _with(
            c, researchers=c.researchers + (dataclasses.replace(r0, researcher_id="RX", sds="CHEM/01"),)
        ),
        "UdaMismatch": _with(
            c, researchers=c.researchers + (dataclasses.replace(r0, researcher_id="RX", uda="BIO"),)
        ),
        "InvalidRank": _with(
            c, researchers=c.researchers + (dataclasses.replace(r0, researcher_id="RX", academic_rank="x"),)
        ),
        "InvalidFte": _with(
            c, researchers=c.researchers + (dataclasses.replace(r0, researcher_id="RX", fte=0.0),)
        ),
        "NegativeCitations": _with(
            c, publications=c.publications + (dataclasses.replace(p0, pub_id="PX", citation_count=-1),)
        ),
        "InvalidDocType": _with(
            c, publications=c.publications + (dataclasses.replace(p0, pub_id="PX", doc_type="book"),)
        ),
        "PositionOutOfRange": _with(c, authorships=a + (Authorship("P4", "R1", 3, 1),)),
        "InconsistentTotalAuthors": _with(c, authorships=a + (Authorship("P2", "R2", 2, 5),)),
        "TooManyAuthors": _with(c, authorships=a + (Authorship("P2", "R2", 1, 1),)),
        "DuplicatePosition": _with(c, authorships=a + (Authorship("P5", "R1", 2, 2),)),
    }


def test_each_violation_class_is_individually_triggerable(tiny_corpus):
    for kind, corpus in _mutations(tiny_corpus).items():
        kinds = _kinds(corpus)
        assert kind in kinds, (kind, kinds)


def test_every_mutation_fails_validation(tiny_corpus):
    for corpus in _mutations(tiny_corpus).values():
        assert not validate(corpus).ok


def test_report_serializes(tiny_corpus):
    c = _mutations(tiny_corpus)["UnknownSds"]
    d = validate(c).to_dict()
    assert d["findings"][0]["kind"] == "UnknownSds"


# ------------------------------------------------------------- round trip


def test_round_trip_identity(tiny_corpus, tmp_path):
    write_corpus(tiny_corpus, tmp_path)
    assert load_corpus(tmp_path) == tiny_corpus


def test_round_trip_identity_synthetic(small_corpus, tmp_path):
    write_corpus(small_corpus, tmp_path)
    assert load_corpus(tmp_path) == small_corpus


def test_round_trip_keeps_wider_window(tiny_corpus, tmp_path):
    wide = _with(tiny_corpus, year_min=1999, year_max=2004)
    write_corpus(wide, tmp_path)
    assert load_corpus(tmp_path) == wide


@settings(max_examples=25, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.randoms(use_true_random=False))
def test_load_is_row_order_independent(small_corpus, tmp_path_factory, rnd):
    src = tmp_path_factory.mktemp("src")
    write_corpus(small_corpus, src)
    dst = tmp_path_factory.mktemp("shuffled")
    for f in src.iterdir():
        shutil.copy(f, dst / f.name)

    def shuffle(rows):
        body = rows[1:]
        rnd.shuffle(body)
        return [rows[0]] + body

    for name in ("institutions", "researchers", "publications", "authorships", "scheme"):
        _rewrite(dst / f"{name}.csv", shuffle)
    assert load_corpus(dst) == load_corpus(src)


def test_corpus_construction_sorts_collections(tiny_corpus):
    shuffled = list(tiny_corpus.authorships)
    random.Random(1).shuffle(shuffled)
    assert tiny_corpus.replace_authorships(shuffled) == tiny_corpus


# ------------------------------------------------------------------ stats


def test_empty_corpus_stats_all_zero():
    c = Corpus((), (), (), (), DisciplineScheme(), 2001, 2003)
    s = corpus_stats(c)
    assert (s.n_institutions, s.n_researchers, s.n_publications, s.n_authorships) == (0, 0, 0, 0)
    assert s.publications_per_cell == {}
    assert s.pubs_per_researcher_mean == 0.0 and s.pubs_per_researcher_max == 0


def test_cell_counts_conserve_publications(tiny_corpus):
    s = corpus_stats(tiny_corpus)
    assert len(s.publications_per_cell) == 3
    assert sum(s.publications_per_cell.values()) == 5


def test_two_cells_sum_to_five():
    c = build_corpus(
        institutions=("A",),
        researchers=[("R1", "A", "X/1")],
        publications=[("P1", 1, 2001, "C"), ("P2", 1, 2001, "C"), ("P3", 0, 2002, "C"),
                      ("P4", 0, 2002, "C"), ("P5", 3, 2002, "C")],
        authorships=[(f"P{i}", "R1") for i in range(1, 6)],
    )
    s = corpus_stats(c)
    assert s.publications_per_cell == {("C", 2001): 2, ("C", 2002): 3}
    assert s.pubs_per_researcher_histogram == {5: 1}


def test_stats_match_generator_config():
    from bibliorank.synth import SynthConfig, generate

    cfg = SynthConfig(seed=42)
    s = corpus_stats(generate(cfg))
    assert s.n_institutions == cfg.n_institutions
    lo, hi = cfg.researchers_per_institution
    assert all(lo <= n <= hi for n in s.researchers_per_institution.values())
    assert set(s.researchers_per_uda) == {d.uda for d in cfg.disciplines}
    assert sum(s.publications_per_cell.values()) == s.n_publications
    assert s.n_authorships == sum(k * v for k, v in s.pubs_per_researcher_histogram.items())
