"""Command-line front end.

Exit codes: 0 success, 1 data or validation failure, 2 usage or config failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Mapping

import numpy as np

from . import __version__
from .analysis import (
    DegenerateInput,
    ZeroTotalOutput,
    attribution_noise_experiment,
    concentration,
    selection_audit,
    sensitivity_run,
)
from .assessment import (
    RANKING_COLUMNS,
    EmptyDiscipline,
    EvaluationScenario,
    InvalidPolicy,
    aggregate_university,
    evaluate_scenario,
    parse_scenarios,
    staff_by_discipline,
)
from .corpus import Corpus, CorpusError, load_corpus, read_corpus, validate, write_corpus
from .indicators import (
    INDICATOR_COLUMNS,
    INDICATOR_NAMES,
    InvalidWeights,
    PositionWeightScheme,
    category_year_baselines,
    quality_scores,
    researcher_indicators,
    score_array,
)
from .synth import InvalidConfig, SynthConfig, generate, load_synth_config

log = logging.getLogger("bibliorank")

EXIT_OK, EXIT_DATA, EXIT_CONFIG = 0, 1, 2
ANALYSES = ("rankings", "sensitivity", "audit", "concentration", "noise")


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------------------
# serialisation helpers; every output is rendered to text first, then written


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o)}")


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=True) + "\n"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def render_table(name: str, header, rows, fmt: str) -> tuple[str, str]:
    rows = [tuple(r) for r in rows]
    if fmt == "json":
        return f"{name}.json", dump_json([dict(zip(header, r)) for r in rows])
    return f"{name}.csv", render_csv(header, rows)


def write_outputs(out_dir: Path, files: Mapping[str, str]) -> None:
    """Write every file via a temporary sibling and an atomic rename."""
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in sorted(files):
        fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(files[name])
        os.replace(tmp, out_dir / name)


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# run configuration


def _read_json(path: Path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def resolve_run_config(path: Path, seed: int | None, fmt: str | None) -> dict:
    """Load a run config (or a manifest embedding one) into canonical form.

    Relative paths are resolved against the config file's directory and a
    synth config file is inlined, so the result alone reproduces the run.
    """
    raw = _read_json(path)
    if not isinstance(raw, dict):
        raise ConfigError("run config must be a JSON object")
    if "config" in raw and "config_sha256" in raw:
        raw = raw["config"]  # a manifest from an earlier run
    base = path.parent

    corpus = raw.get("corpus")
    if not isinstance(corpus, dict) or len(corpus) != 1:
        raise ConfigError("'corpus' must be an object with exactly one of: path, synth, synth_config")
    if "path" in corpus:
        corpus_cfg = {"path": str((base / corpus["path"]).resolve())}
    elif "synth_config" in corpus:
        corpus_cfg = {"synth": load_synth_config(base / corpus["synth_config"]).to_dict()}
    elif "synth" in corpus:
        corpus_cfg = {"synth": SynthConfig.from_dict(corpus["synth"]).to_dict()}
    else:
        raise ConfigError(f"unknown corpus source {sorted(corpus)}")

    master = seed if seed is not None else raw.get("seed")
    if master is not None:
        if isinstance(master, bool) or not isinstance(master, int) or master < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {master!r}")
        if "synth" in corpus_cfg:
            corpus_cfg["synth"]["seed"] = master
    elif "synth" in corpus_cfg:
        # record the seed actually used so a manifest rerun cannot drift
        master = corpus_cfg["synth"]["seed"]

    analyses = raw.get("analyses", ["rankings", "sensitivity"])
    if not isinstance(analyses, list) or not analyses:
        raise ConfigError("'analyses' must be a non-empty list")
    bad = [a for a in analyses if a not in ANALYSES]
    if bad:
        raise ConfigError(f"unknown analyses {bad}; choose from {ANALYSES}")

    scenarios = raw.get("scenarios", [])
    if not isinstance(scenarios, list):
        raise ConfigError("'scenarios' must be a list")
    parsed = parse_scenarios(scenarios)

    fmt = fmt or raw.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")

    cfg = {
        "corpus": corpus_cfg,
        "scenarios": [s.to_dict() for s in parsed],
        "analyses": sorted(set(analyses), key=ANALYSES.index),
        "seed": master if master is not None else 0,
        "format": fmt,
        "position_weights": raw.get("position_weights", {"variant": "uniform_fraction"}),
        "sensitivity": {"method": "spearman", **raw.get("sensitivity", {})},
        "audit": {"scenarios": None, **raw.get("audit", {})},
        "concentration": {"indicator": "fractional_count", "shares": [0.72], **raw.get("concentration", {})},
        "noise": {"epsilon": 0.05, "n_seeds": 10, "disciplines": None, **raw.get("noise", {})},
    }
    if cfg["sensitivity"]["method"] not in ("spearman", "pearson"):
        raise ConfigError("sensitivity.method must be spearman or pearson")
    if cfg["concentration"]["indicator"] not in INDICATOR_NAMES:
        raise ConfigError(f"concentration.indicator must be one of {INDICATOR_NAMES}")
    eps = cfg["noise"]["epsilon"]
    if not isinstance(eps, (int, float)) or not (0 <= eps <= 1):
        raise ConfigError("noise.epsilon must be in [0, 1]")
    if not isinstance(cfg["noise"]["n_seeds"], int) or cfg["noise"]["n_seeds"] < 1:
        raise ConfigError("noise.n_seeds must be a positive integer")
    needs_scenarios = {"rankings", "sensitivity", "audit"} & set(cfg["analyses"])
    if needs_scenarios and not parsed:
        raise ConfigError(f"analyses {sorted(needs_scenarios)} need at least one scenario")
    return cfg


def _position_scheme(cfg: dict) -> PositionWeightScheme:
    pw = cfg["position_weights"]
    return PositionWeightScheme(
        pw.get("variant", "uniform_fraction"), float(pw.get("w_first", 0.0)), float(pw.get("w_last", 0.0))
    )


def _load_run_corpus(cfg: dict) -> Corpus:
    src = cfg["corpus"]
    if "path" in src:
        try:
            return load_corpus(src["path"])
        except CorpusError as exc:
            raise DataError(str(exc)) from None
    return generate(SynthConfig.from_dict(src["synth"]))


# ---------------------------------------------------------------------------
# pipeline


def run_pipeline(cfg: dict, only: str | None = None) -> dict[str, str]:
    """Execute a resolved run config; returns ``file name -> content``."""
    analyses = [only] if only else cfg["analyses"]
    fmt = cfg["format"]
    corpus = _load_run_corpus(cfg)
    scheme = _position_scheme(cfg)
    scenarios = parse_scenarios(cfg["scenarios"])
    known = set(corpus.index.udas)
    for sc in scenarios:
        if sc.discipline not in known:
            raise ConfigError(f"scenario {sc.label!r}: discipline {sc.discipline!r} not in corpus")

    files: dict[str, str] = {}
    scores = quality_scores(corpus, category_year_baselines(corpus))
    q = score_array(corpus, scores)
    log.info("scored %d publications", len(scores))

    if "rankings" in analyses:
        files["scores.csv"] = render_csv(("pub_id", "q"), sorted(scores.items()))
        rows = researcher_indicators(corpus, scores, scheme)
        files["indicators.csv"] = render_csv(INDICATOR_COLUMNS, (r.as_row() for r in rows))
        benchmarks = {}
        for sc in scenarios:
            _, table = evaluate_scenario(corpus, q, sc)
            name, text = render_table(
                f"ranking_{sc.label}", RANKING_COLUMNS,
                ([getattr(r, c) for c in RANKING_COLUMNS] for r in table.by_rank()), fmt,
            )
            files[name] = text
            if sc.is_benchmark:
                benchmarks.setdefault(sc.discipline, table)
        if len(benchmarks) > 1:
            overall = aggregate_university(benchmarks, staff_by_discipline(corpus))
            name, text = render_table(
                "ranking_overall", RANKING_COLUMNS,
                ([getattr(r, c) for c in RANKING_COLUMNS] for r in overall.by_rank()), fmt,
            )
            files[name] = text

    by_disc: dict[str, list[EvaluationScenario]] = {}
    for sc in scenarios:
        by_disc.setdefault(sc.discipline, []).append(sc)

    if "sensitivity" in analyses:
        reports = {}
        matrix_rows, curve_rows = [], []
        for disc in sorted(by_disc):
            rep = sensitivity_run(corpus, q, by_disc[disc], method=cfg["sensitivity"]["method"])
            reports[disc] = rep.to_dict()
            for inst, row in rep.decile_frequency_matrix.items():
                matrix_rows.append((disc, inst, *row))
            for r in rep.results:
                curve_rows.append(
                    (disc, r.label, r.share_evaluated, r.spearman_vs_benchmark,
                     r.median_abs_rank_shift, r.max_abs_rank_shift)
                )
        files["sensitivity.json"] = dump_json({"disciplines": reports})
        name, text = render_table(
            "frequency_matrix",
            ("discipline", "institution_id") + tuple(f"decile_{k}" for k in range(1, 11)),
            matrix_rows, fmt,
        )
        files[name] = text
        name, text = render_table(
            "sensitivity_curve",
            ("discipline", "label", "share_evaluated", "spearman", "median_abs_rank_shift",
             "max_abs_rank_shift"),
            sorted(curve_rows, key=lambda r: (r[0], r[2], r[1])), fmt,
        )
        files[name] = text

    if "audit" in analyses:
        wanted = cfg["audit"]["scenarios"]
        summary_rows, detail_rows = [], []
        for sc in scenarios:
            if wanted is None and sc.is_benchmark:
                continue
            if wanted is not None and sc.label not in wanted:
                continue
            evaluated, _ = evaluate_scenario(corpus, q, sc)
            audit = selection_audit(corpus, q, evaluated)
            s = audit.summary()
            summary_rows.append(
                (sc.discipline, sc.label, s["average"], s["median"], s["max"],
                 s["variation_coefficient"], s["n_institutions"], s["n_flagged"])
            )
            for r in audit.rows:
                detail_rows.append(
                    (sc.discipline, sc.label, r.institution_id, r.n_outputs, r.n_selected,
                     r.n_below_median, r.median_q, r.below_median_share)
                )
        name, text = render_table(
            "audit",
            ("discipline", "label", "average", "median", "max", "variation_coefficient",
             "n_institutions", "n_flagged"),
            summary_rows, fmt,
        )
        files[name] = text
        name, text = render_table(
            "audit_institutions",
            ("discipline", "label", "institution_id", "n_outputs", "n_selected",
             "n_below_median", "median_q", "below_median_share"),
            detail_rows, fmt,
        )
        files[name] = text

    if "concentration" in analyses:
        ccfg = cfg["concentration"]
        try:
            res = concentration(corpus, ccfg["indicator"], q, scheme)
        except ZeroTotalOutput as exc:
            raise DataError(str(exc)) from None
        name, text = render_table(
            "concentration",
            ("position", "researcher_id", "value", "staff_fraction", "output_fraction"),
            (
                (k, res.researcher_ids[k - 1] if k else "", res.values[k - 1] if k else 0.0, s, o)
                for k, (s, o) in enumerate(res.lorenz_points)
            ),
            fmt,
        )
        files[name] = text
        files["concentration_summary.json"] = dump_json(
            {
                "indicator": res.indicator,
                "n_researchers": res.n,
                "staff_fraction_for": {f"{x:g}": res.staff_fraction_for(x) for x in ccfg["shares"]},
            }
        )

    if "noise" in analyses:
        ncfg = cfg["noise"]
        rep = attribution_noise_experiment(
            corpus, float(ncfg["epsilon"]), int(ncfg["n_seeds"]), seed=int(cfg["seed"]),
            disciplines=ncfg["disciplines"], scores=q,
        )
        files["noise.json"] = dump_json(rep.to_dict())

    return files


def _manifest(cfg: dict, command: str, files: Mapping[str, str]) -> str:
    cfg_text = dump_json(cfg)
    return dump_json(
        {
            "tool": "bibliorank",
            "version": __version__,
            "command": command,
            "seed": cfg["seed"],
            "config_sha256": _sha256(cfg_text),
            "config": cfg,
            "outputs": {k: _sha256(v) for k, v in sorted(files.items())},
        }
    )


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    paths = args.paths[0] if len(args.paths) == 1 else args.paths
    out = Path(args.out or ".")
    try:
        corpus = read_corpus(paths)
    except CorpusError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    report = validate(corpus)
    write_outputs(out, {"validation.json": dump_json(report.to_dict())})
    if report.ok:
        log.info("corpus valid")
        return EXIT_OK
    for f in report.findings:
        log.warning("%s %s %s %s", f.kind, f.entity, f.key, f.detail)
    return EXIT_DATA


def cmd_synth(args) -> int:
    if not args.config:
        log.error("synth needs --config")
        return EXIT_CONFIG
    try:
        cfg = load_synth_config(args.config)
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
    except (InvalidConfig, OSError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    corpus = generate(cfg)
    out = Path(args.out or ".")
    with tempfile.TemporaryDirectory() as tmp:
        written = write_corpus(corpus, tmp)
        files = {p.name: p.read_text(encoding="utf-8") for p in written.values()}
    write_outputs(out, files)
    log.info("wrote %d publications to %s", len(corpus.publications), out)
    return EXIT_OK


def _cmd_run(args, only: str | None) -> int:
    if not args.config:
        log.error("%s needs --config", args.command)
        return EXIT_CONFIG
    try:
        cfg = resolve_run_config(Path(args.config), args.seed, args.format)
        files = run_pipeline(cfg, only)
    except (ConfigError, InvalidConfig, InvalidPolicy, InvalidWeights) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (DataError, CorpusError, EmptyDiscipline, DegenerateInput, ZeroTotalOutput) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    files["manifest.json"] = _manifest(cfg, args.command, files)
    out = Path(args.out) if args.out else Path(".")
    write_outputs(out, files)
    log.info("wrote %d files to %s", len(files), out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bibliorank", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"bibliorank {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--seed", type=int, metavar="N", help="overrides the config seed")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("-v", "--verbose", action="store_true")

    v = sub.add_parser("validate", help="check a corpus and write validation.json")
    v.add_argument("paths", nargs="+", help="corpus directory or CSV files")
    common(v, config=False)
    common(sub.add_parser("synth", help="generate a synthetic corpus"))
    common(sub.add_parser("assess", help="score, rank and run the configured analyses"))
    common(sub.add_parser("audit", help="selection-effectiveness audit only"))
    common(sub.add_parser("concentration", help="output concentration only"))
    common(sub.add_parser("noise", help="attribution-noise experiment only"))
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    if args.command == "validate":
        return cmd_validate(args)
    if args.command == "synth":
        return cmd_synth(args)
    only = None if args.command == "assess" else args.command
    return _cmd_run(args, only)


if __name__ == "__main__":
    sys.exit(main())
