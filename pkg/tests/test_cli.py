import csv
import json
import shutil
import subprocess
import sys

import pytest

from bibliorank.cli import main
from bibliorank.corpus import load_corpus, write_corpus
from bibliorank.synth import SynthConfig

from conftest import CONFIGS, REPO

SMALL_SYNTH = SynthConfig(n_institutions=6, researchers_per_institution=(4, 8), seed=3).to_dict()


def _write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.fixture
def corpus_dir(tmp_path, tiny_corpus):
    d = tmp_path / "corpus"
    write_corpus(tiny_corpus, d)
    return d


# --------------------------------------------------------------- validate


def test_validate_valid(corpus_dir, tmp_path):
    assert main(["validate", str(corpus_dir), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "validation.json").read_text())
    assert report["findings"] == []


def test_validate_dangling(corpus_dir, tmp_path):
    with open(corpus_dir / "authorships.csv", "a") as fh:
        fh.write("P9,R1,1,1\n")
    assert main(["validate", str(corpus_dir), "--out", str(tmp_path / "o")]) == 1
    report = json.loads((tmp_path / "o" / "validation.json").read_text())
    assert len(report["findings"]) == 1 and report["findings"][0]["kind"] == "DanglingReference"


def test_validate_missing_file(corpus_dir, tmp_path):
    (corpus_dir / "publications.csv").unlink()
    assert main(["validate", str(corpus_dir), "--out", str(tmp_path / "o")]) == 2


def test_validate_does_not_mutate_inputs(corpus_dir, tmp_path):
    before = _files(corpus_dir)
    main(["validate", str(corpus_dir), "--out", str(tmp_path / "o")])
    assert _files(corpus_dir) == before


def test_validate_shipped_corpus(tmp_path):
    assert main(["validate", str(REPO / "data" / "synthetic_physics"), "--out", str(tmp_path)]) == 0


# ------------------------------------------------------------------ synth


def test_synth_deterministic(tmp_path):
    cfg = _write_json(tmp_path / "s.json", SMALL_SYNTH)
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_synth_seed_flag_overrides(tmp_path):
    cfg = _write_json(tmp_path / "s.json", SMALL_SYNTH)
    main(["synth", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["synth", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "99"])
    assert _files(tmp_path / "a") != _files(tmp_path / "b")


def test_synth_zero_institutions(tmp_path):
    cfg = _write_json(tmp_path / "s.json", {**SMALL_SYNTH, "n_institutions": 0})
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 2


def test_synth_needs_config(tmp_path):
    assert main(["synth", "--out", str(tmp_path)]) == 2


def test_shipped_synth_config_closes_pipeline(tmp_path):
    assert main(["synth", "--config", str(CONFIGS / "physics_synth.json"), "--out", str(tmp_path / "c")]) == 0
    assert main(["validate", str(tmp_path / "c"), "--out", str(tmp_path / "v")]) == 0
    shipped = load_corpus(REPO / "data" / "synthetic_physics")
    assert load_corpus(tmp_path / "c") == shipped


# ----------------------------------------------------------------- assess


def _run_cfg(tmp_path, scenarios, analyses=("rankings", "sensitivity"), **extra):
    return _write_json(
        tmp_path / "run.json",
        {"corpus": {"synth": SMALL_SYNTH}, "scenarios": scenarios, "analyses": list(analyses), **extra},
    )


def test_benchmark_only_config(tmp_path):
    cfg = _run_cfg(tmp_path, [{"label": "bench", "discipline": "PHYS", "policy": {"type": "all_outputs"}}])
    assert main(["assess", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    sens = json.loads((tmp_path / "o" / "sensitivity.json").read_text())
    (entry,) = sens["disciplines"]["PHYS"]["scenarios"]
    assert entry["spearman_vs_benchmark"] == 1.0


def test_shipped_eight_scenario_config(tmp_path):
    out = tmp_path / "o"
    assert main(["assess", "--config", str(CONFIGS / "physics_sensitivity.json"), "--out", str(out)]) == 0
    with open(out / "frequency_matrix.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 50
    for row in rows:
        cells = [float(row[f"decile_{k}"]) for k in range(1, 11)]
        assert abs(sum(cells) - 100) <= 0.5
        assert all(c % 12.5 == 0 for c in cells)
    for name in ("ranking_share_05.csv", "audit.csv", "sensitivity_curve.csv", "manifest.json"):
        assert (out / name).is_file()


def test_rerun_from_manifest_is_byte_identical(tmp_path):
    cfg = _run_cfg(
        tmp_path,
        [
            {"label": "b", "discipline": "PHYS"},
            {"label": "v", "discipline": "PHYS", "policy": {"type": "best_k", "param": 2},
             "selector": {"type": "noisy", "p_swap": 0.2, "seed": 1}},
        ],
        analyses=("rankings", "sensitivity", "audit", "concentration", "noise"),
        noise={"epsilon": 0.05, "n_seeds": 2},
    )
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["assess", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["assess", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
    assert _files(a) == _files(b)


def test_manifest_contents(tmp_path):
    cfg = _run_cfg(tmp_path, [{"label": "b", "discipline": "PHYS"}], seed=7)
    main(["assess", "--config", str(cfg), "--out", str(tmp_path / "o")])
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["seed"] == 7 and man["config"]["corpus"]["synth"]["seed"] == 7
    assert len(man["config_sha256"]) == 64
    assert set(man["outputs"]) == {p.name for p in (tmp_path / "o").iterdir()} - {"manifest.json"}


def test_json_format(tmp_path):
    cfg = _run_cfg(tmp_path, [{"label": "b", "discipline": "PHYS"}])
    assert main(["assess", "--config", str(cfg), "--out", str(tmp_path / "o"), "--format", "json"]) == 0
    rows = json.loads((tmp_path / "o" / "ranking_b.json").read_text())
    assert rows[0]["competition_rank"] == 1
    assert not (tmp_path / "o" / "ranking_b.csv").exists()


def test_relative_corpus_path(tmp_path, tiny_corpus):
    write_corpus(tiny_corpus, tmp_path / "data")
    cfg = _write_json(tmp_path / "run.json", {"corpus": {"path": "data"},
                                               "scenarios": [{"label": "b", "discipline": "PHYS"}]})
    assert main(["assess", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0


@pytest.mark.parametrize(
    "body",
    [
        {"corpus": {}, "scenarios": []},
        {"corpus": {"synth": SMALL_SYNTH}, "scenarios": [], "analyses": ["rankings"]},
        {"corpus": {"synth": SMALL_SYNTH}, "scenarios": [{"discipline": "PHYS"}], "analyses": ["plots"]},
        {"corpus": {"synth": SMALL_SYNTH}, "scenarios": [{"discipline": "CHEM"}]},
        {"corpus": {"synth": SMALL_SYNTH}, "scenarios": [{"discipline": "PHYS", "policy": {"type": "best_k", "param": 0}}]},
        {"corpus": {"synth": {**SMALL_SYNTH, "n_institutions": 0}}, "scenarios": [{"discipline": "PHYS"}]},
        {"corpus": {"synth": SMALL_SYNTH}, "analyses": ["noise"], "noise": {"epsilon": 2}},
    ],
)
def test_config_errors_exit_two(tmp_path, body):
    cfg = _write_json(tmp_path / "run.json", body)
    assert main(["assess", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_missing_config_file(tmp_path):
    assert main(["assess", "--config", str(tmp_path / "nope.json")]) == 2


def test_bad_corpus_exits_one(tmp_path, tiny_corpus):
    write_corpus(tiny_corpus, tmp_path / "data")
    with open(tmp_path / "data" / "authorships.csv", "a") as fh:
        fh.write("P9,R1,1,1\n")
    cfg = _write_json(tmp_path / "run.json", {"corpus": {"path": "data"},
                                               "scenarios": [{"discipline": "PHYS"}]})
    assert main(["assess", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_usage_error_exits_two():
    assert main(["frobnicate"]) == 2
    assert main(["assess", "--format", "xml"]) == 2


@pytest.mark.parametrize(
    "command,expected",
    [
        ("audit", {"audit.csv", "audit_institutions.csv"}),
        ("concentration", {"concentration.csv", "concentration_summary.json"}),
        ("noise", {"noise.json"}),
    ],
)
def test_single_analysis_subcommands(tmp_path, command, expected):
    cfg = _run_cfg(
        tmp_path,
        [{"label": "b", "discipline": "PHYS"},
         {"label": "q", "discipline": "PHYS", "policy": {"type": "fte_quota", "param": 0.25}}],
        noise={"epsilon": 0.1, "n_seeds": 2},
    )
    out = tmp_path / "o"
    assert main([command, "--config", str(cfg), "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == expected | {"manifest.json"}


def test_noise_epsilon_zero_via_cli(tmp_path):
    cfg = _run_cfg(tmp_path, [], analyses=("noise",), noise={"epsilon": 0.0, "n_seeds": 3})
    assert main(["noise", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "noise.json").read_text())
    assert rep["spearman_institution_level"] == 1.0 and rep["spearman_individual_level"] == 1.0


def test_policy_comparison_config(tmp_path):
    out = tmp_path / "o"
    assert main(["assess", "--config", str(CONFIGS / "policy_comparison.json"), "--out", str(out)]) == 0
    assert (out / "ranking_overall.csv").is_file() and (out / "noise.json").is_file()


def test_module_entry_point(tmp_path):
    cfg = _write_json(tmp_path / "s.json", SMALL_SYNTH)
    proc = subprocess.run(
        [sys.executable, "-m", "bibliorank", "synth", "--config", str(cfg), "--out", str(tmp_path / "c")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "c" / "publications.csv").is_file()


@pytest.mark.skipif(shutil.which("bibliorank") is None, reason="console script not installed")
def test_console_script_version():
    proc = subprocess.run(["bibliorank", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "bibliorank" in proc.stdout
