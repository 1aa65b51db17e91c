"""Config-driven experiment runner and report emission.

A run loads data, splits it once, fits preprocessing and feature selection on
the training partition, then for every sampling scenario resamples the
training rows, trains each configured model and evaluates it on the
untouched test partition.
"""

from __future__ import annotations

import configparser
import io
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import preprocess as pp
from .classifiers import DEFAULTS, KINDS, ModelSpec, fit_model
from .data import Dataset, SyntheticSpec, generate_synthetic, read_dataset
from .evaluation import BOT_IOT_EXACT_TRAIN_COUNTS, METRIC_ORDER, EvalReport, evaluate, holdout_split
from .features import SCORERS, FeatureReport, format_report, score_features, select_union
from .sampling import SmoteConfig, random_oversample, random_undersample, smote

log = logging.getLogger(__name__)

SAMPLING_MODES = ("none", "smote", "ros", "rus")
SCENARIO_NAMES = {"none": "imbalanced", "smote": "smote", "ros": "ros", "rus": "rus"}
BAR_METRICS = ("fpr", "fnr", "recall", "precision", "inference_seconds")

# desk-scale caps applied to the experiment defaults (not to the bare classifiers)
EXPERIMENT_MODEL_DEFAULTS = {
    "svm_linear_kernel": {"max_train_rows": 4000},
    "svm_rbf_kernel": {"max_train_rows": 4000},
}

BASE_DEFAULTS: dict[str, dict] = {
    "data": {"source": "synthetic", "path": "", "schema": "bot-iot", "label_column": "attack"},
    "synthetic": {"n_majority": 5000, "n_minority": 50, "n_features": 10,
                  "class_separation": 1.6, "noise_sigma": 1.0, "seed": 0},
    "split": {"train_fraction": 0.67, "stratified": True, "seed": 0, "train_counts": ""},
    "preprocess": {"enabled": True, "categorical_columns": "auto",
                   "max_categories": pp.DEFAULT_MAX_CATEGORIES, "drop": ",".join(pp.DEFAULT_DROP)},
    "features": {"enabled": True, "scorers": ",".join(SCORERS), "threshold_fraction": 0.05,
                 "chi2_threshold": None, "mutual_info_threshold": None,
                 "rf_importance_threshold": None, "n_bins": 10, "rf_trees": 100,
                 "rf_max_depth": 16, "seed": 0},
    "sampling": {"modes": "none,smote", "k": 5, "target_ratio": 1.0, "seed": 0,
                 "scalar_gamma": False, "provenance": False},
    "models": {"kinds": ",".join(KINDS)},
    "evaluation": {"measure_time": True, "timing_runs": 3},
    "run": {"debug": False},
    "output": {"dir": "results"},
}


class ConfigError(ValueError):
    pass


class LeakageError(AssertionError):
    """A test-partition row reached a training-side stage."""


# ---------------------------------------------------------------- values

def format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ",".join(format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_value(s: str):
    """Best-effort typed value: none, booleans, ints, floats, comma lists, else the string."""
    t = s.strip()
    low = t.lower()
    if low in ("none", "null"):
        return None
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if "," in t:
        return tuple(parse_value(x) for x in t.split(",") if x.strip())
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    return t


# string settings that may also hold a number or none
_POLYMORPHIC = {"max_features"}


def _parse_for(default, key: str, raw: str):
    """Parse ``raw`` guided by the type of the setting's default."""
    if isinstance(default, str) and key not in _POLYMORPHIC:
        return raw.strip()
    if isinstance(default, bool):
        v = parse_value(raw)
        if not isinstance(v, bool):
            raise ConfigError(f"{key} must be true or false, got {raw!r}")
        return v
    if isinstance(default, tuple):
        v = parse_value(raw)
        return v if isinstance(v, tuple) else (v,)
    return parse_value(raw)


def _as_list(v) -> list[str]:
    if v is None or v == "":
        return []
    if isinstance(v, (tuple, list)):
        return [str(x) for x in v]
    return [x.strip() for x in str(v).split(",") if x.strip()]


def default_sections() -> dict[str, dict]:
    out = {k: dict(v) for k, v in BASE_DEFAULTS.items()}
    for kind in KINDS:
        sec = {**DEFAULTS[kind], "seed": 0, **EXPERIMENT_MODEL_DEFAULTS.get(kind, {})}
        out[f"model:{kind}"] = sec
    return out


# ---------------------------------------------------------------- config

@dataclass
class ExperimentConfig:
    """Every setting of a run, keyed ``section -> key -> typed value``."""

    sections: dict[str, dict] = field(default_factory=default_sections)

    def get(self, section: str, key: str):
        return self.sections[section][key]

    def set(self, section: str, key: str, value) -> None:
        if section not in self.sections or key not in self.sections[section]:
            raise ConfigError(f"unknown setting [{section}] {key}")
        if isinstance(value, str):
            value = _parse_for(default_sections().get(section, {}).get(key), key, value)
        self.sections[section][key] = value

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp.read_string(text)
        cfg = cls()
        for section in cp.sections():
            for key, raw in cp.items(section):
                cfg.set(section, key, raw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_ini(Path(path).read_text(encoding="utf-8"))

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for section, values in self.sections.items():
            cp[section] = {k: format_value(v) for k, v in values.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    # typed accessors
    @property
    def modes(self) -> list[str]:
        return _as_list(self.get("sampling", "modes"))

    @property
    def kinds(self) -> list[str]:
        return _as_list(self.get("models", "kinds"))

    def model_spec(self, kind: str) -> ModelSpec:
        hp = dict(self.sections[f"model:{kind}"])
        if kind == "mlp":
            h = hp["hidden"]
            hp["hidden"] = tuple(int(x) for x in (h if isinstance(h, tuple) else (h,)))
        return ModelSpec(kind, hp)

    def smote_config(self) -> SmoteConfig:
        s = self.sections["sampling"]
        return SmoteConfig(k=int(s["k"]), target_ratio=float(s["target_ratio"]), seed=int(s["seed"]),
                           scalar_gamma=bool(s["scalar_gamma"]))

    def synthetic_spec(self) -> SyntheticSpec:
        s = self.sections["synthetic"]
        return SyntheticSpec(n_majority=int(s["n_majority"]), n_minority=int(s["n_minority"]),
                             n_features=int(s["n_features"]),
                             class_separation=float(s["class_separation"]),
                             noise_sigma=float(s["noise_sigma"]), seed=int(s["seed"]))

    def train_counts(self) -> dict[int, int] | None:
        raw = self.get("split", "train_counts")
        if raw in (None, ""):
            return None
        if raw == "bot-iot":
            return dict(BOT_IOT_EXACT_TRAIN_COUNTS)
        out = {}
        for item in _as_list(raw):
            label, _, count = str(item).partition(":")
            out[int(label)] = int(count)
        return out

    def validate(self) -> None:
        if not self.kinds:
            raise ConfigError("at least one model kind is required")
        for k in self.kinds:
            if k not in KINDS:
                raise ConfigError(f"unknown model kind {k!r}")
            self.model_spec(k)
        if not self.modes:
            raise ConfigError("at least one sampling mode is required")
        for m in self.modes:
            if m not in SAMPLING_MODES:
                raise ConfigError(f"unknown sampling mode {m!r}; expected one of {SAMPLING_MODES}")
        for s in _as_list(self.get("features", "scorers")):
            if s not in SCORERS:
                raise ConfigError(f"unknown scorer {s!r}")
        if self.get("data", "source") not in ("synthetic", "csv"):
            raise ConfigError("[data] source must be synthetic or csv")
        if self.get("data", "source") == "csv" and not self.get("data", "path"):
            raise ConfigError("[data] path is required when source = csv")
        self.smote_config()
        self.synthetic_spec()
        self.train_counts()


# ---------------------------------------------------------------- pipeline

@dataclass
class Cell:
    kind: str
    scenario: str
    report: EvalReport | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ExperimentResult:
    cells: list[Cell]
    feature_reports: list[FeatureReport] = field(default_factory=list)
    selected_features: list[str] = field(default_factory=list)
    # scenario -> train class counts, plus "test"
    class_counts: dict[str, dict[int, int]] = field(default_factory=dict)
    audit: list[tuple[str, int]] = field(default_factory=list)
    # scenario -> SMOTE provenance
    provenance: dict = field(default_factory=dict)
    config: ExperimentConfig | None = None

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.cells)

    def __iter__(self):
        return iter((c.kind, c.scenario, c.report) for c in self.cells)

    def __len__(self):
        return len(self.cells)


class _Auditor:
    """Checks row tags of every training-side input against the test partition."""

    def __init__(self, test: Dataset, enabled: bool):
        self.enabled = enabled
        self.test_ids = np.unique(test.row_ids[test.row_ids >= 0])
        self.log: list[tuple[str, int]] = []

    def check(self, stage: str, d: Dataset) -> None:
        if not self.enabled:
            return
        ids = d.row_ids[d.row_ids >= 0]
        leaked = np.intersect1d(ids, self.test_ids)
        if leaked.size:
            raise LeakageError(f"{leaked.size} test rows reached stage {stage!r}")
        self.log.append((stage, int(d.n_rows)))


def load_data(cfg: ExperimentConfig) -> Dataset:
    s = cfg.sections["data"]
    if s["source"] == "csv":
        # a named schema, or a comma-separated column list
        schema = _as_list(s["schema"]) if "," in s["schema"] else s["schema"]
        return read_dataset(s["path"], schema=schema, label_column=s["label_column"])
    return generate_synthetic(cfg.synthetic_spec())


def preprocess_options(cfg: ExperimentConfig, names) -> dict:
    """Keyword arguments for ``preprocess.fit``; ``auto`` keeps the default
    categorical columns that the data actually has."""
    pre = cfg.sections["preprocess"]
    cats = pre["categorical_columns"]
    if cats == "auto":
        cats = [c for c in pp.DEFAULT_CATEGORICAL if c in names]
    return {"categorical_columns": _as_list(cats), "max_categories": int(pre["max_categories"]),
            "drop": _as_list(pre["drop"])}


def prepare(cfg: ExperimentConfig, data: Dataset | None = None, audit: _Auditor | None = None):
    """Split, fit preprocessing on train, transform both partitions.

    Returns ``(train, test, preprocessor_or_None, auditor)``.
    """
    data = load_data(cfg) if data is None else data
    sp = cfg.sections["split"]
    train, test = holdout_split(data, float(sp["train_fraction"]), bool(sp["stratified"]),
                                int(sp["seed"]), cfg.train_counts())
    audit = audit or _Auditor(test, bool(cfg.get("run", "debug")))
    prep = None
    pre = cfg.sections["preprocess"]
    if pre["enabled"]:
        audit.check("preprocess.fit", train)
        prep = pp.fit(train, **preprocess_options(cfg, train.names))
        train, test = pp.transform(prep, train), pp.transform(prep, test)
    return train, test, prep, audit


def select_features(cfg: ExperimentConfig, train: Dataset) -> tuple[list[FeatureReport], list[str]]:
    f = cfg.sections["features"]
    thresholds = {s: f[f"{s}_threshold"] for s in SCORERS if f[f"{s}_threshold"] is not None}
    reports = score_features(train, _as_list(f["scorers"]), n_bins=int(f["n_bins"]),
                             rf_trees=int(f["rf_trees"]), rf_max_depth=f["rf_max_depth"],
                             seed=int(f["seed"]), thresholds=thresholds,
                             threshold_fraction=float(f["threshold_fraction"]))
    union = select_union(reports)
    if not union:
        raise ValueError("feature selection kept no columns")
    return reports, union


def sample_training(mode: str, d: Dataset, cfg: SmoteConfig):
    """Resample ``d``; returns ``(dataset, provenance_or_None)``."""
    if mode == "none":
        return d, None
    if mode == "smote":
        return smote(d, cfg, return_provenance=True)
    if mode == "ros":
        return random_oversample(d, cfg.target_ratio, cfg.seed), None
    if mode == "rus":
        return random_undersample(d, cfg.target_ratio, cfg.seed), None
    raise ValueError(f"unknown sampling mode {mode!r}")


def run_experiment(cfg: ExperimentConfig, data: Dataset | None = None) -> ExperimentResult:
    """One report per (model kind, sampling scenario); failed cells keep their error text."""
    cfg.validate()
    train, test, _, audit = prepare(cfg, data)
    result = ExperimentResult(cells=[], config=cfg)

    if cfg.get("features", "enabled"):
        audit.check("feature-select", train)
        result.feature_reports, union = select_features(cfg, train)
        train, test = train.select(union), test.select(union)
        result.selected_features = union
        log.info("kept %d features: %s", len(union), ", ".join(union))
    else:
        result.selected_features = list(train.names)

    X_test, y_test = test.numeric_X(), test.y
    result.class_counts["test"] = test.class_counts()
    measure = bool(cfg.get("evaluation", "measure_time"))
    runs = int(cfg.get("evaluation", "timing_runs"))
    scfg = cfg.smote_config()

    for mode in cfg.modes:
        scenario = SCENARIO_NAMES[mode]
        try:
            audit.check(f"sample[{scenario}]", train)
            sampled, prov = sample_training(mode, train, scfg)
            audit.check(f"fit[{scenario}]", sampled)
        except LeakageError:
            raise
        except Exception as exc:  # whole scenario fails, other scenarios proceed
            log.error("sampling %s failed: %s", scenario, exc)
            for kind in cfg.kinds:
                result.cells.append(Cell(kind, scenario, error=f"{type(exc).__name__}: {exc}"))
            continue
        result.class_counts[scenario] = sampled.class_counts()
        if prov is not None:
            result.provenance[scenario] = prov
        for kind in cfg.kinds:
            try:
                model = fit_model(sampled, cfg.model_spec(kind))
                report = evaluate(model, X_test, y_test, measure_time=measure, timing_runs=runs)
                result.cells.append(Cell(kind, scenario, report))
                log.info("%s/%s: fpr=%.6f recall=%.6f", kind, scenario, report.fpr, report.recall)
            except Exception as exc:
                log.error("%s/%s failed: %s", kind, scenario, exc)
                result.cells.append(Cell(kind, scenario, error=f"{type(exc).__name__}: {exc}"))
    result.audit = audit.log
    return result


# ---------------------------------------------------------------- reports

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


SUMMARY_HEADER = ("model", "scenario", "accuracy", "recall", "precision", "fnr", "fpr", "f1",
                  "auc", "inference_s", "status")


def _fmt_seconds(v) -> str:
    return "n/a" if v is None else f"{v:.4f}"


def format_summary(cells) -> str:
    """Fixed-width comparison table; metrics are percentages."""
    rows = [list(SUMMARY_HEADER)]
    for c in cells:
        if c.report is None:
            rows.append([c.kind, c.scenario] + ["-"] * 8 + [f"FAILED {c.error}"])
            continue
        r = c.report
        pct = [f"{100 * getattr(r, k):.4f}" for k in METRIC_ORDER[:-1]]
        status = "ok" if not r.undefined else "ok (0/0: " + ",".join(r.undefined) + ")"
        rows.append([c.kind, c.scenario, *pct, _fmt_seconds(r.inference_seconds), status])
    widths = [max(len(row[i]) for row in rows) for i in range(len(SUMMARY_HEADER) - 1)]
    lines = []
    for row in rows:
        cells_ = [v.ljust(w) if i < 2 else v.rjust(w) for i, (v, w) in enumerate(zip(row, widths))]
        lines.append("  ".join(cells_ + [row[-1]]).rstrip())
    return "\n".join(lines) + "\n"


RECORD_HEADER = ("model", "scenario", *METRIC_ORDER, "tp", "fn", "fp", "tn", "timing_runs",
                 "timing_variance", "undefined", "error")


def format_records(cells) -> str:
    """Tab-separated full-precision record per cell."""
    lines = ["\t".join(RECORD_HEADER)]
    for c in cells:
        if c.report is None:
            vals = [""] * (len(RECORD_HEADER) - 3) + [c.error or ""]
            lines.append("\t".join([c.kind, c.scenario, *vals]))
            continue
        r = c.report
        vals = [repr(float(getattr(r, k))) if getattr(r, k) is not None else "n/a" for k in METRIC_ORDER]
        cm = r.confusion
        vals += [str(cm.tp), str(cm.fn), str(cm.fp), str(cm.tn), str(r.timing_runs),
                 repr(float(r.timing_variance)) if r.timing_runs else "n/a", ",".join(r.undefined), ""]
        lines.append("\t".join([c.kind, c.scenario, *vals]))
    return "\n".join(lines) + "\n"


def format_roc(report: EvalReport) -> str:
    return "fpr\ttpr\n" + "".join(f"{f!r}\t{t!r}\n" for f, t in report.roc_points.tolist())


def format_bars(cells, metric: str) -> str:
    """model x scenario grid of one metric (blank for failed cells)."""
    scenarios = list(dict.fromkeys(c.scenario for c in cells))
    kinds = list(dict.fromkeys(c.kind for c in cells))
    grid = {(c.kind, c.scenario): c.report for c in cells}
    lines = ["\t".join(["model", *scenarios])]
    for k in kinds:
        row = [k]
        for s in scenarios:
            r = grid.get((k, s))
            v = None if r is None else getattr(r, metric)
            row.append("n/a" if v is None else repr(float(v)))
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def emit_reports(results, out_dir, config: ExperimentConfig | None = None) -> list[Path]:
    """Write summary, records, ROC points, bar data, feature reports and config.

    ``results`` is an ExperimentResult or a plain list of Cells. Returns the
    written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    cells = list(results.cells if isinstance(results, ExperimentResult) else results)
    written = []

    def put(rel, text):
        p = out / rel
        _atomic_write(p, text)
        written.append(p)

    put("summary.txt", format_summary(cells))
    put("results.tsv", format_records(cells))
    for c in cells:
        if c.report is not None:
            put(f"roc/{c.kind}__{c.scenario}.tsv", format_roc(c.report))
    for m in BAR_METRICS:
        put(f"bars/{m}.tsv", format_bars(cells, m))

    if isinstance(results, ExperimentResult):
        for rep in results.feature_reports:
            put(f"features/{rep.scorer}.tsv", format_report(rep))
        if results.feature_reports:
            put("features/selected.txt", "".join(f + "\n" for f in results.selected_features))
        if results.class_counts:
            lines = ["partition\tclass_0\tclass_1"]
            for name, cc in results.class_counts.items():
                lines.append(f"{name}\t{cc.get(0, 0)}\t{cc.get(1, 0)}")
            put("class_counts.tsv", "\n".join(lines) + "\n")
        if results.audit:
            put("audit.txt", "".join(f"{stage}\t{n}\tok\n" for stage, n in results.audit))
        config = config or results.config
        if config is not None and config.get("sampling", "provenance"):
            for scenario, prov in results.provenance.items():
                put(f"provenance_{scenario}.txt", "".join(line + "\n" for line in prov.lines()))
    if config is not None:
        put("config.ini", config.to_ini())
    return written
