"""Config-driven orchestration of the five lifecycle steps.

Steps run in a fixed order::

    clean -> context -> impute -> outliers      (wrangle, inject, repair)
          -> regress -> classify -> sentiment   (model / coefficient)
          -> evaluate

Each enabled step writes its artifacts under the output directory, first as
``<name>.partial`` and renamed once the step succeeds.  A failed step leaves
its ``.partial`` files behind and aborts the run.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import json
import logging
import os
import time
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import forest as forest_mod
from . import impute as impute_mod
from . import metrics as metrics_mod
from . import outlier as outlier_mod
from . import plotting
from . import regress as regress_mod
from . import sentiment as sentiment_mod
from . import tabular
from .fixtures import MEDAL_CLASSES

logger = logging.getLogger(__name__)

CONTEXT_COLUMNS = ("Sport", "Sex", "Age", "Height", "Weight")


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, step: str, cause: BaseException):
        super().__init__(f"step {step!r} failed: {cause}")
        self.step = step
        self.cause = cause


# configuration -------------------------------------------------------------

@dataclass
class CleanStep:
    enabled: bool = False
    dataset: str = ""
    na_tokens: tuple[str, ...] = tabular.DEFAULT_NA_TOKENS
    filter_column: str = ""
    filter_values: tuple[str, ...] = ()
    recode_column: str = ""
    recode_label: str = "No medal"


@dataclass
class ContextStep:
    enabled: bool = False
    # each entry is "<csv path>@<key>+<key>..."
    joins: tuple[str, ...] = ()


@dataclass
class ImputeStep:
    enabled: bool = False
    columns: tuple[str, ...] = CONTEXT_COLUMNS
    iterations: int = 50
    donor_pool: int = 5
    visit_order: str = impute_mod.LEFT_TO_RIGHT
    ridge: float = 1e-8


@dataclass
class OutliersStep:
    enabled: bool = False
    columns: tuple[str, ...] = CONTEXT_COLUMNS
    k: int = 5
    top: int = 20
    filter: bool = False
    threshold: float = 1.5


@dataclass
class RegressStep:
    enabled: bool = False
    year_column: str = "Year"
    country_column: str = "NOC"
    sport_column: str = "Sport"
    medal_column: str = "Medal"
    no_medal_label: str = "No medal"
    holdout_year: int | None = None
    schemes: tuple[str, ...] = tuple(s.name for s in regress_mod.weight_scenarios())
    chart_groups: int = 12


@dataclass
class ClassifyStep:
    enabled: bool = False
    features: tuple[str, ...] = CONTEXT_COLUMNS
    label_column: str = "Medal"
    year_column: str = "Year"
    train_until: int | None = None
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    mtry: int | None = None


@dataclass
class EvaluateStep:
    enabled: bool = False


@dataclass
class SentimentStep:
    enabled: bool = False
    tweets: str = ""
    lexicon: str = ""


STEP_ORDER = ("clean", "context", "impute", "outliers", "regress", "classify",
              "sentiment", "evaluate")
STOCHASTIC = ("impute", "classify")


@dataclass
class PipelineConfig:
    out: str = "out"
    seed: int | None = None
    clean: CleanStep = field(default_factory=CleanStep)
    context: ContextStep = field(default_factory=ContextStep)
    impute: ImputeStep = field(default_factory=ImputeStep)
    outliers: OutliersStep = field(default_factory=OutliersStep)
    regress: RegressStep = field(default_factory=RegressStep)
    classify: ClassifyStep = field(default_factory=ClassifyStep)
    sentiment: SentimentStep = field(default_factory=SentimentStep)
    evaluate: EvaluateStep = field(default_factory=EvaluateStep)
    # relative input paths resolve against this directory; not serialized
    base_dir: str = field(default=".", compare=False)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def enabled_steps(self) -> list[str]:
        return [s for s in STEP_ORDER if getattr(self, s).enabled]

    def validate(self) -> None:
        steps = set(self.enabled_steps())
        if "clean" in steps and not self.clean.dataset:
            raise ConfigError("clean step needs a dataset path")
        needs_table = steps & {"context", "impute", "outliers", "regress", "classify"}
        if needs_table and "clean" not in steps:
            raise ConfigError(f"steps {sorted(needs_table)} need the clean step enabled")
        if "context" in steps and not self.context.joins:
            raise ConfigError("context step needs at least one join")
        if "sentiment" in steps and not self.sentiment.tweets:
            raise ConfigError("sentiment step needs a tweet corpus path")
        if "evaluate" in steps and not steps & {"classify", "regress", "sentiment"}:
            raise ConfigError("evaluate step needs classify, regress or sentiment enabled")
        if steps & set(STOCHASTIC) and self.seed is None:
            raise ConfigError("a seed is required when impute or classify is enabled")


def _encode_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(v if v else '""' for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _decode_value(text: str, hint, where: str):
    text = text.strip()
    args = typing.get_args(hint)
    if type(None) in args:
        if text == "":
            return None
        hint = next(a for a in args if a is not type(None))
    try:
        if hint is bool:
            low = text.lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError(text)
            return low in ("true", "yes", "1", "on")
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
        if typing.get_origin(hint) is tuple:
            if text == "":
                return ()
            return tuple("" if v.strip() == '""' else v.strip() for v in text.split(","))
        return text
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r}") from None


def _section_types(cls) -> dict:
    return typing.get_type_hints(cls)


def parse_config(text: str, base_dir: str = ".") -> PipelineConfig:
    """Parse the INI layout produced by :func:`dump_config`."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    cfg = PipelineConfig(base_dir=base_dir)
    unknown = set(parser.sections()) - set(STEP_ORDER) - {"pipeline"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    top_types = _section_types(PipelineConfig)
    if parser.has_section("pipeline"):
        for key, raw in parser.items("pipeline"):
            if key not in ("out", "seed"):
                raise ConfigError(f"[pipeline]: unknown key {key!r}")
            setattr(cfg, key, _decode_value(raw, top_types[key], f"[pipeline] {key}"))
    for name in STEP_ORDER:
        if not parser.has_section(name):
            continue
        section = getattr(cfg, name)
        types = _section_types(type(section))
        for key, raw in parser.items(name):
            if key not in types:
                raise ConfigError(f"[{name}]: unknown key {key!r}")
            setattr(section, key, _decode_value(raw, types[key], f"[{name}] {key}"))
    return cfg


def dump_config(cfg: PipelineConfig) -> str:
    lines = ["[pipeline]", f"out = {cfg.out}", f"seed = {_encode_value(cfg.seed)}"]
    for name in STEP_ORDER:
        section = getattr(cfg, name)
        lines += ["", f"[{name}]"]
        for f in dataclasses.fields(section):
            lines.append(f"{f.name} = {_encode_value(getattr(section, f.name))}")
    return "\n".join(lines) + "\n"


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=str(path.parent))


# run -----------------------------------------------------------------------

@dataclass
class StepReport:
    step: str
    seconds: float
    rows_in: int | None
    rows_out: int | None
    artifacts: dict  # file name -> sha256


@dataclass
class RunReport:
    sections: list = field(default_factory=list)
    evaluation: dict = field(default_factory=dict)

    def checksums(self) -> dict:
        return {name: digest for s in self.sections for name, digest in s.artifacts.items()}

    def to_json(self) -> dict:
        return {"sections": [dataclasses.asdict(s) for s in self.sections],
                "evaluation": self.evaluation}


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class _Artifacts:
    """Collects a step's output files under ``.partial`` names until commit."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.names: list[str] = []

    def path(self, name: str) -> Path:
        self.names.append(name)
        return self.out_dir / f"{name}.partial"

    def commit(self) -> dict:
        digests = {}
        for name in self.names:
            final = self.out_dir / name
            os.replace(self.out_dir / f"{name}.partial", final)
            digests[name] = sha256(final)
        return digests


@dataclass
class _State:
    table: tabular.Table | None = None
    predictions: list | None = None
    forecasts: dict | None = None
    coefficients: list | None = None


def run(config: PipelineConfig) -> RunReport:
    """Execute the enabled steps; raises :class:`PipelineError` on failure."""
    config.validate()
    out_dir = config.resolve(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    state = _State()
    report = RunReport()
    for name in config.enabled_steps():
        arts = _Artifacts(out_dir)
        rows_in = state.table.row_count if state.table is not None else None
        t0 = time.perf_counter()
        try:
            _STEPS[name](config, getattr(config, name), state, arts, report)
        except Exception as exc:
            logger.error("step %s failed: %s", name, exc)
            raise PipelineError(name, exc) from exc
        digests = arts.commit()
        rows_out = state.table.row_count if state.table is not None else None
        report.sections.append(StepReport(name, round(time.perf_counter() - t0, 6),
                                          rows_in, rows_out, digests))
        logger.info("step %s done (%d artifacts)", name, len(digests))
    with open(out_dir / "run_report.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def _step_clean(config, step: CleanStep, state, arts, report):
    t = tabular.ingest_csv(config.resolve(step.dataset), na_tokens=step.na_tokens)
    if step.filter_column:
        t = tabular.filter_rows(t, step.filter_column, step.filter_values)
    if step.recode_column:
        t = tabular.recode_missing_label(t, step.recode_column, step.recode_label)
    tabular.write_csv(t, arts.path("clean.csv"))
    patterns, per_column = tabular.missingness_patterns(t)
    write_patterns(t, patterns, per_column, arts.path("missing_patterns.csv"))
    state.table = t


def _step_context(config, step: ContextStep, state, arts, report):
    t = state.table
    for spec in step.joins:
        path, _, keys = spec.partition("@")
        if not keys:
            raise ConfigError(f"join {spec!r} must look like <path>@<key>+<key>")
        key_list = [k.strip() for k in keys.split("+")]
        # keys must share a kind to match
        hints = {k: t.spec(k).kind for k in key_list}
        aux = tabular.ingest_csv(config.resolve(path.strip()), schema_hints=hints)
        t = tabular.left_join(t, aux, key_list)
    tabular.write_csv(t, arts.path("context.csv"))
    state.table = t


def _step_impute(config, step: ImputeStep, state, arts, report):
    cfg = impute_mod.MiceConfig(step.iterations, step.donor_pool, config.seed,
                                step.visit_order, step.ridge)
    result = impute_mod.mice_impute(state.table, step.columns, cfg)
    tabular.write_csv(result.completed, arts.path("imputed.csv"))
    impute_mod.write_chain_means(result, arts.path("chain_means.csv"))
    state.table = result.completed


def _step_outliers(config, step: OutliersStep, state, arts, report):
    m = tabular.encode_and_scale(state.table, step.columns)
    scores = outlier_mod.lof_scores(m, outlier_mod.LofConfig(step.k))
    outlier_mod.write_scores(scores, arts.path("lof.csv"))
    outlier_mod.write_scores(scores, arts.path("outliers_top.csv"), top=step.top)
    if step.filter:
        keep = ~(scores.scores > step.threshold)
        state.table = state.table.take(keep)
        tabular.write_csv(state.table, arts.path("filtered.csv"))


def _step_regress(config, step: RegressStep, state, arts, report):
    series = regress_mod.medal_count_series(state.table, step.year_column, step.country_column,
                                            step.sport_column, step.medal_column,
                                            step.no_medal_label)
    schemes = [regress_mod.scheme(s) for s in step.schemes]
    forecasts = regress_mod.forecast_groups(series, step.holdout_year, schemes)
    write_forecasts(forecasts, arts.path("regress_report.csv"))
    summary = regress_mod.forecast_summary(forecasts)
    _write_json(render_undefined(summary), arts.path("regress_summary.json"))
    plotting.emit_bar_chart(chart_pairs(forecasts, summary, step.chart_groups),
                            arts.path("medals.svg"))
    state.forecasts = summary
    report.evaluation["regression"] = render_undefined(summary)


def _step_classify(config, step: ClassifyStep, state, arts, report):
    t = state.table
    labels = tabular.encode_medals(t, step.label_column).column(step.label_column)
    if np.isnan(labels).any():
        raise ValueError(f"label column {step.label_column!r} has missing cells")
    X = tabular.encode_and_scale(t, step.features).values
    y = labels.astype(int)
    if step.train_until is not None:
        years = t.column(step.year_column)
        train = years <= step.train_until
        test = ~train
        if not test.any():
            test = train
    else:
        train = test = np.ones(t.row_count, dtype=bool)
    if not train.any():
        raise ValueError("no training rows")
    cfg = forest_mod.ForestConfig(step.n_trees, step.max_depth, step.min_leaf, step.mtry,
                                  config.seed)
    model = forest_mod.train_forest(X[train], y[train], cfg, classes=MEDAL_CLASSES)
    forest_mod.save(model, arts.path("forest.model"))
    pred = forest_mod.predict_forest(model, X[test])
    rows = np.flatnonzero(test)
    with open(arts.path("predictions.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row_index", "actual", "predicted"])
        for r, p in zip(rows, pred):
            w.writerow([int(r), int(y[r]), int(p)])
    state.predictions = list(zip(y[rows].tolist(), pred))


def _step_sentiment(config, step: SentimentStep, state, arts, report):
    tweets = sentiment_mod.load_tweets(config.resolve(step.tweets))
    lex = (sentiment_mod.load_lexicon(config.resolve(step.lexicon)) if step.lexicon
           else sentiment_mod.default_lexicon())
    scores = sentiment_mod.score_corpus(lex, tweets)
    coeffs = sentiment_mod.team_coefficients(scores, tweets)
    with open(arts.path("tweet_scores.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "team", "country", "score"])
        for t, s in zip(tweets, scores):
            w.writerow([t.id, t.team, t.country or "", s])
    sentiment_mod.write_coefficients(coeffs, arts.path("team_coefficients.csv"))
    countries = sentiment_mod.country_aggregate(scores, tweets)
    write_country_means(countries, arts.path("country_sentiment.csv"))
    by_team = {c.team: c.atss for c in coeffs}
    ranking = sentiment_mod.rank_teams(coeffs)
    plotting.emit_ranking_chart([(team, by_team[team]) for team in ranking], arts.path("atss.svg"))
    plotting.emit_heat_strip(countries, arts.path("country_sentiment.svg"))
    state.coefficients = coeffs
    report.evaluation["team_ranking"] = ranking
    report.evaluation["coefficients"] = "team_coefficients.csv"


def _step_evaluate(config, step: EvaluateStep, state, arts, report):
    if state.predictions is not None:
        actual = [a for a, _ in state.predictions]
        pred = [p for _, p in state.predictions]
        cm = metrics_mod.confusion_matrix(pred, actual, MEDAL_CLASSES)
        doc = metrics_mod.report(cm)
        _write_json(doc, arts.path("metrics.json"))
        report.evaluation["metrics"] = doc
        report.evaluation["accuracy"] = metrics_mod.format_percent(doc["accuracy"])


_STEPS = {
    "clean": _step_clean,
    "context": _step_context,
    "impute": _step_impute,
    "outliers": _step_outliers,
    "regress": _step_regress,
    "classify": _step_classify,
    "sentiment": _step_sentiment,
    "evaluate": _step_evaluate,
}


# artifact writers ------------------------------------------------------------

def render_undefined(obj):
    if obj is None:
        return metrics_mod.UNDEFINED
    if isinstance(obj, dict):
        return {k: render_undefined(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [render_undefined(v) for v in obj]
    return obj


def _write_json(doc, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_patterns(t, patterns, per_column, path) -> None:
    """One row per missingness pattern (1 = observed) plus a trailing totals row."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["count"] + t.names)
        for p in patterns:
            w.writerow([p.count] + [int(b) for b in p.mask])
        w.writerow(["missing"] + [per_column[n] for n in t.names])


def write_forecasts(forecasts, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country", "sport", "scheme", "actual", "predicted_raw", "predicted_rounded"])
        for f in forecasts:
            w.writerow([f.country, f.sport, f.scheme, f.actual, repr(f.predicted_raw),
                        f.predicted_rounded])


def read_forecasts(path) -> list[regress_mod.Forecast]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [regress_mod.Forecast(r["country"], r["sport"], r["scheme"], int(r["actual"]),
                                     float(r["predicted_raw"])) for r in csv.DictReader(fh)]


def write_country_means(means: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country", "mean_score"])
        for c, v in means.items():
            w.writerow([c, repr(v)])


def best_scheme(summary: dict) -> str | None:
    if not summary:
        return None
    return min(summary, key=lambda name: (summary[name]["mae"], list(summary).index(name)))


def chart_pairs(forecasts, summary: dict, limit: int) -> list[tuple[str, int, int]]:
    """(label, actual, rounded prediction) for the largest groups under the
    lowest-error scheme."""
    name = best_scheme(summary)
    rows = [f for f in forecasts if f.scheme == name]
    rows.sort(key=lambda f: (-f.actual, f.country, f.sport))
    return [(f"{f.country} {f.sport}", f.actual, f.predicted_rounded) for f in rows[:limit]]


def render_report(out_dir) -> str:
    """Re-render charts from the data artifacts in ``out_dir``; returns a text summary."""
    out_dir = Path(out_dir)
    lines = []
    reg = out_dir / "regress_report.csv"
    if reg.exists():
        forecasts = read_forecasts(reg)
        summary = regress_mod.forecast_summary(forecasts)
        plotting.emit_bar_chart(chart_pairs(forecasts, summary, 12), out_dir / "medals.svg")
        best = best_scheme(summary)
        lines.append(f"regression: {len(forecasts)} forecasts, best scheme {best}")
        for name, s in summary.items():
            adj = s["adjusted_r2"]
            adj = metrics_mod.UNDEFINED if adj is None else f"{adj:.4f}"
            lines.append(f"  {name:<14} mae={s['mae']:.3f} adjusted_r2={adj}")
    met = out_dir / "metrics.json"
    if met.exists():
        doc = json.loads(met.read_text(encoding="utf-8"))
        cm = metrics_mod.from_report(doc)
        lines.append(f"classification accuracy: {metrics_mod.format_percent(doc['accuracy'])}")
        lines.append("  correct per class: " + ", ".join(f"{c}={v}" for c, v in cm.correct.items()))
    coef = out_dir / "team_coefficients.csv"
    if coef.exists():
        rows = sentiment_mod.read_coefficients(coef)
        plotting.emit_ranking_chart([(t, a) for t, a, _ in rows], out_dir / "atss.svg")
        lines.append("team ranking:")
        lines += [f"  {i}. {t} atss={a:.3f} tweets={n}" for i, (t, a, n) in enumerate(rows, 1)]
    cs = out_dir / "country_sentiment.csv"
    if cs.exists():
        with open(cs, newline="", encoding="utf-8") as fh:
            means = {r["country"]: float(r["mean_score"]) for r in csv.DictReader(fh)}
        plotting.emit_heat_strip(means, out_dir / "country_sentiment.svg")
    if not lines:
        lines.append(f"no report artifacts found in {out_dir}")
    return "\n".join(lines)
