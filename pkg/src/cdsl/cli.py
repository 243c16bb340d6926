"""Command-line entry point.

Single-stage subcommands (``impute``, ``outliers``, ...) build a pipeline
config with the clean step plus that stage enabled, so they write the same
artifacts as ``run``.  ``--config`` supplies defaults; flags override them.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import metrics, pipeline, tabular
from .pipeline import ConfigError, PipelineConfig, PipelineError

logger = logging.getLogger("cdsl")


def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="pipeline config file (INI sections per step)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="random seed for stochastic steps")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="dataset CSV")
    p.add_argument("--na-tokens", type=lambda s: tuple(s.split(",")),
                   help='comma-separated missing tokens (default: ",NA")')
    p.add_argument("--filter", metavar="COLUMN=V1,V2", help="keep rows with these values")
    p.add_argument("--recode", metavar="COLUMN[=LABEL]",
                   help='fill missing cells of a categorical column (default label "No medal")')


# subcommand -> {argparse dest: (config section, field)}
OVERRIDES = {
    "impute": {"columns": ("impute", "columns"), "iterations": ("impute", "iterations"),
               "donor_pool": ("impute", "donor_pool"), "visit_order": ("impute", "visit_order"),
               "ridge": ("impute", "ridge")},
    "outliers": {"columns": ("outliers", "columns"), "k": ("outliers", "k"),
                 "top": ("outliers", "top"), "filter_threshold": ("outliers", "threshold")},
    "regress": {"year_column": ("regress", "year_column"),
                "country_column": ("regress", "country_column"),
                "sport_column": ("regress", "sport_column"),
                "medal_column": ("regress", "medal_column"),
                "no_medal_label": ("regress", "no_medal_label"),
                "holdout_year": ("regress", "holdout_year"), "schemes": ("regress", "schemes")},
    "classify": {"features": ("classify", "features"),
                 "label_column": ("classify", "label_column"),
                 "year_column": ("classify", "year_column"),
                 "train_until": ("classify", "train_until"), "n_trees": ("classify", "n_trees"),
                 "max_depth": ("classify", "max_depth"), "min_leaf": ("classify", "min_leaf"),
                 "mtry": ("classify", "mtry")},
    "sentiment": {"input": ("sentiment", "tweets"), "lexicon": ("sentiment", "lexicon")},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdsl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a CSV, report schema, write a normalized copy")
    _dataset_args(p)
    p.add_argument("--kind", action="append", default=[], metavar="COLUMN=numeric|categorical")
    _common(p)

    p = sub.add_parser("patterns", help="missing-data patterns and per-column counts")
    _dataset_args(p)
    _common(p)

    p = sub.add_parser("impute", help="chained-equation imputation with PMM")
    _dataset_args(p)
    p.add_argument("--columns", type=_csv_list)
    p.add_argument("--iterations", type=int)
    p.add_argument("--donor-pool", type=int)
    p.add_argument("--visit-order", choices=["left-to-right", "most-missing-first"])
    p.add_argument("--ridge", type=float)
    _common(p)

    p = sub.add_parser("outliers", help="Local Outlier Factor scores")
    _dataset_args(p)
    p.add_argument("--columns", type=_csv_list)
    p.add_argument("--k", type=int)
    p.add_argument("--top", type=int)
    p.add_argument("--filter-threshold", type=float)
    _common(p)

    p = sub.add_parser("regress", help="per country/sport weighted medal forecasts")
    _dataset_args(p)
    p.add_argument("--year-column")
    p.add_argument("--country-column")
    p.add_argument("--sport-column")
    p.add_argument("--medal-column")
    p.add_argument("--no-medal-label")
    p.add_argument("--holdout-year", type=int)
    p.add_argument("--schemes", type=_csv_list)
    _common(p)

    p = sub.add_parser("classify", help="random forest medal classifier")
    _dataset_args(p)
    p.add_argument("--features", type=_csv_list)
    p.add_argument("--label-column")
    p.add_argument("--year-column")
    p.add_argument("--train-until", type=int)
    p.add_argument("--n-trees", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--min-leaf", type=int)
    p.add_argument("--mtry", type=int)
    _common(p)

    p = sub.add_parser("evaluate", help="confusion matrix metrics")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--predictions", help="CSV with actual and predicted columns")
    src.add_argument("--matrix", help="CSV counts matrix: header of classes, prediction rows")
    _common(p)

    p = sub.add_parser("sentiment", help="tweet scores and team coefficients")
    p.add_argument("input", help="tab-separated tweet corpus")
    p.add_argument("--lexicon", help="token<TAB>weight file (default: bundled lexicon)")
    _common(p)

    p = sub.add_parser("run", help="run every step enabled in the config")
    _common(p)

    p = sub.add_parser("report", help="re-render charts and summarize an output directory")
    _common(p)
    return parser


def _load(args) -> PipelineConfig:
    cfg = pipeline.load_config(args.config) if args.config else PipelineConfig()
    if args.out is not None:
        cfg.out = str(Path(args.out).resolve())
    elif not args.config:
        cfg.out = str(Path("out").resolve())
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _apply_dataset(cfg: PipelineConfig, args) -> None:
    cfg.clean.enabled = True
    cfg.clean.dataset = str(Path(args.input).resolve())
    if args.na_tokens is not None:
        cfg.clean.na_tokens = args.na_tokens
    if args.filter:
        col, _, values = args.filter.partition("=")
        cfg.clean.filter_column, cfg.clean.filter_values = col, _csv_list(values)
    if args.recode:
        col, _, label = args.recode.partition("=")
        cfg.clean.recode_column = col
        if label:
            cfg.clean.recode_label = label


def _apply_overrides(cfg: PipelineConfig, args) -> None:
    for dest, (section, name) in OVERRIDES.get(args.command, {}).items():
        value = getattr(args, dest, None)
        if value is not None:
            if dest == "input":
                value = str(Path(value).resolve())
            setattr(getattr(cfg, section), name, value)


def _only(cfg: PipelineConfig, *steps: str) -> None:
    for name in pipeline.STEP_ORDER:
        getattr(cfg, name).enabled = name in steps


def _print_report(report: pipeline.RunReport, cfg: PipelineConfig) -> None:
    out = cfg.resolve(cfg.out)
    for s in report.sections:
        rows = "" if s.rows_out is None else f" rows {s.rows_in}->{s.rows_out}"
        print(f"{s.step:<10} {s.seconds:8.3f}s{rows}")
        for name in s.artifacts:
            print(f"    {out / name}")


def cmd_stage(args) -> int:
    cfg = _load(args)
    _apply_overrides(cfg, args)
    steps = {"patterns": ("clean",), "impute": ("clean", "impute"),
             "outliers": ("clean", "outliers"), "regress": ("clean", "regress"),
             "classify": ("clean", "classify", "evaluate"),
             "sentiment": ("sentiment",)}[args.command]
    if args.command != "sentiment":
        _apply_dataset(cfg, args)
    if args.command in ("impute", "classify") and cfg.seed is None:
        cfg.seed = 0
    _only(cfg, *steps)
    report = pipeline.run(cfg)
    _print_report(report, cfg)
    if args.command == "classify":
        print(f"accuracy {report.evaluation['accuracy']}")
    if args.command == "sentiment":
        for i, team in enumerate(report.evaluation["team_ranking"], 1):
            print(f"{i}. {team}")
    return 0


def cmd_ingest(args) -> int:
    cfg = _load(args)
    hints = {}
    for spec in args.kind:
        col, _, kind = spec.partition("=")
        hints[col] = kind
    na = args.na_tokens if args.na_tokens is not None else cfg.clean.na_tokens
    t = tabular.ingest_csv(args.input, schema_hints=hints, na_tokens=na)
    if args.filter:
        col, _, values = args.filter.partition("=")
        t = tabular.filter_rows(t, col, _csv_list(values))
    if args.recode:
        col, _, label = args.recode.partition("=")
        t = tabular.recode_missing_label(t, col, label or "No medal")
    out = Path(cfg.resolve(cfg.out))
    out.mkdir(parents=True, exist_ok=True)
    tabular.write_csv(t, out / "table.csv")
    schema = {
        "row_count": t.row_count,
        "columns": [{"name": s.name, "kind": s.kind, "categories": list(s.categories),
                     "missing": int((~t.column_mask(s.name)).sum())} for s in t.schema],
    }
    with open(out / "schema.json", "w", encoding="utf-8") as fh:
        json.dump(schema, fh, indent=2)
        fh.write("\n")
    print(f"{t.row_count} rows, {t.col_count} columns")
    for c in schema["columns"]:
        extra = f" ({len(c['categories'])} categories)" if c["kind"] == tabular.CATEGORICAL else ""
        print(f"  {c['name']:<16} {c['kind']:<11}{extra} missing={c['missing']}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    if args.matrix:
        with open(args.matrix, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        classes = tuple(int(c) if c.lstrip("-").isdigit() else c for c in rows[0])
        cm = metrics.ConfusionMatrix(classes, [[int(v) for v in r] for r in rows[1:] if r])
    else:
        with open(args.predictions, newline="", encoding="utf-8") as fh:
            recs = list(csv.DictReader(fh))
        actual = [int(r["actual"]) for r in recs]
        pred = [int(r["predicted"]) for r in recs]
        classes = tuple(sorted(set(actual) | set(pred)))
        cm = metrics.confusion_matrix(pred, actual, classes)
    doc = metrics.report(cm)
    out = Path(cfg.resolve(cfg.out))
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"accuracy {metrics.format_percent(doc['accuracy'])} over {cm.total} instances")
    for c, r, p in zip(cm.classes, doc["per_class_recall"], doc["per_class_precision"]):
        fmt = lambda v: v if isinstance(v, str) else f"{v:.4f}"  # noqa: E731
        print(f"  class {c}: correct={cm.correct[c]} recall={fmt(r)} precision={fmt(p)}")
    return 0


def cmd_run(args) -> int:
    if not args.config:
        raise ConfigError("run needs --config")
    cfg = _load(args)
    report = pipeline.run(cfg)
    _print_report(report, cfg)
    return 0


def cmd_report(args) -> int:
    cfg = _load(args)
    print(pipeline.render_report(cfg.resolve(cfg.out)))
    return 0


COMMANDS = {"ingest": cmd_ingest, "evaluate": cmd_evaluate, "run": cmd_run, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS.get(args.command, cmd_stage)(args)
    except PipelineError as exc:
        print(f"cdsl: error in step {exc.step}: {exc.cause}", file=sys.stderr)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"cdsl: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
