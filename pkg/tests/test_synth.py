import filecmp
import json
from collections import Counter

import pytest

from bibliorank.analysis import concentration
from bibliorank.corpus import validate, write_corpus
from bibliorank.synth import (
    CoauthorParams,
    InvalidConfig,
    SkewParams,
    SynthConfig,
    generate,
    load_synth_config,
)

from conftest import CONFIGS

SMALL = SynthConfig(n_institutions=6, researchers_per_institution=(3, 8), seed=1)


def test_same_seed_gives_byte_identical_files(tmp_path):
    write_corpus(generate(SMALL), tmp_path / "a")
    write_corpus(generate(SMALL), tmp_path / "b")
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert cmp.left_list and not cmp.diff_files and not cmp.left_only and not cmp.right_only
    for name in cmp.common_files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_pubs_fixed_at_one():
    cfg = SMALL.replace(
        pubs_per_researcher=SkewParams(1.0, 0.0),
        coauthors=CoauthorParams(mean_extra_authors=3.0, internal_share=0.0),
    )
    c = generate(cfg)
    per = Counter(a.researcher_id for a in c.authorships)
    assert all(per[r.researcher_id] == 1 for r in c.researchers)
    assert len(c.publications) == len(c.researchers)


def test_seed_change_changes_corpus():
    assert generate(SMALL) != generate(SMALL.replace(seed=2))


@pytest.mark.parametrize("seed", [0, 1, 42, 2**63 + 5])
def test_generated_corpus_validates(seed):
    assert validate(generate(SMALL.replace(seed=seed))).ok


def test_default_corpus_validates(default_corpus):
    assert validate(default_corpus).ok


def test_counts_follow_config():
    c = generate(SMALL)
    assert len(c.institutions) == 6
    per_inst = Counter(r.institution_id for r in c.researchers)
    assert all(3 <= n <= 8 for n in per_inst.values())
    assert (c.year_min, c.year_max) == SMALL.window


def test_appending_institutions_keeps_existing_draws():
    base = generate(SMALL)
    more = generate(SMALL.replace(n_institutions=9))
    pubs = {p.pub_id: p for p in more.publications}
    assert all(pubs[p.pub_id] == p for p in base.publications)
    res = {r.researcher_id: r for r in more.researchers}
    assert all(res[r.researcher_id] == r for r in base.researchers)


def test_output_is_heavy_tailed(default_corpus):
    counts = sorted(Counter(a.researcher_id for a in default_corpus.authorships).values())
    assert counts[-1] >= 5 * counts[len(counts) // 2]


def test_top_28_percent_hold_at_least_60_percent(default_corpus):
    res = concentration(default_corpus)
    assert res.output_share_of_top(0.28) >= 0.60


def test_citations_differ_by_category(default_corpus):
    by_cat = {}
    for p in default_corpus.publications:
        by_cat.setdefault(p.subject_category, []).append(p.citation_count)
    means = {k: sum(v) / len(v) for k, v in by_cat.items()}
    assert means["CELL-BIOLOGY"] > 2 * means["PHYS-APPLIED"]


@pytest.mark.parametrize(
    "changes",
    [
        {"n_institutions": 0},
        {"researchers_per_institution": (0, 3)},
        {"researchers_per_institution": (5, 3)},
        {"disciplines": ()},
        {"pubs_per_researcher": SkewParams(0.0, 1.0)},
        {"pubs_per_researcher": SkewParams(5.0, -1.0)},
        {"citations": SkewParams(5.0, float("inf"))},
        {"coauthors": CoauthorParams(internal_share=1.5)},
        {"fte_levels": ((1.5, 1.0),)},
        {"rank_weights": (0.0, 0.0, 0.0)},
        {"window": (2005, 2001)},
        {"seed": -1},
    ],
)
def test_invalid_config(changes):
    with pytest.raises(InvalidConfig):
        SMALL.replace(**changes)


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(InvalidConfig):
        SynthConfig.from_dict({"n_instituions": 3})


def test_from_dict_rejects_fractional_counts():
    with pytest.raises(InvalidConfig):
        SynthConfig.from_dict({"n_institutions": 2.5})


def test_json_round_trip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(SMALL.to_dict()))
    assert load_synth_config(path) == SMALL


def test_invalid_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(InvalidConfig):
        load_synth_config(path)


def test_shipped_default_config_matches_defaults():
    assert load_synth_config(CONFIGS / "default_synth.json") == SynthConfig()


def test_shipped_physics_config_loads():
    cfg = load_synth_config(CONFIGS / "physics_synth.json")
    assert [d.uda for d in cfg.disciplines] == ["PHYS"]
