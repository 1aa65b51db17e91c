"""Feature scoring (chi-squared, mutual information, forest Gini importance),
thresholding and union selection."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import Dataset

SCORERS = ("chi2", "mutual_info", "rf_importance")
DEFAULT_THRESHOLD_FRACTION = 0.05


@dataclass(frozen=True)
class FeatureReport:
    scorer: str
    scores: dict[str, float]
    threshold: float
    selected: tuple[str, ...]

    def __post_init__(self):
        if self.scorer not in SCORERS:
            raise ValueError(f"unknown scorer {self.scorer!r}")

    def ranked(self) -> list[tuple[str, float]]:
        return sorted(self.scores.items(), key=lambda kv: (-kv[1], kv[0]))


def make_report(scorer: str, names: Sequence[str], values, threshold: float | None = None,
                threshold_fraction: float = DEFAULT_THRESHOLD_FRACTION) -> FeatureReport:
    """Build a report; the default threshold keeps scores >= ``threshold_fraction`` of the best."""
    values = np.asarray(values, dtype=np.float64)
    if threshold is None:
        threshold = threshold_fraction * float(values.max()) if values.size else 0.0
    scores = {n: float(v) for n, v in zip(names, values)}
    selected = tuple(n for n in names if scores[n] >= threshold)
    return FeatureReport(scorer, scores, float(threshold), selected)


def chi2_statistics(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-feature chi-squared over classes, treating each feature's per-class
    sum as the observed count and its class-proportional share of the column
    total as the expected count. Columns summing to zero score 0."""
    X = np.asarray(X, dtype=np.float64)
    if X.size and X.min() < 0:
        raise ValueError("chi-squared scores need nonnegative features")
    n = X.shape[0]
    total = X.sum(axis=0)
    stat = np.zeros(X.shape[1])
    for c in (0, 1):
        mask = y == c
        observed = X[mask].sum(axis=0)
        expected = total * (mask.sum() / n)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(expected > 0, (observed - expected) ** 2 / expected, 0.0)
        stat += term
    return stat


def chi2_scores(d: Dataset, **kw) -> FeatureReport:
    return make_report("chi2", d.names, chi2_statistics(d.numeric_X(), d.y), **kw)


def equal_frequency_bins(x: np.ndarray, n_bins: int) -> np.ndarray:
    """Bin codes 0..B-1 from quantile cut points (duplicate cuts merged, so
    features with few distinct values get fewer bins)."""
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return np.zeros(0, dtype=np.int64)
    cuts = np.unique(np.quantile(x, np.arange(1, n_bins) / n_bins))
    return np.searchsorted(cuts, x, side="right")


def mutual_information(a: np.ndarray, b: np.ndarray) -> float:
    """Mutual information in nats between two discrete code vectors."""
    a = np.unique(np.asarray(a), return_inverse=True)[1].reshape(-1)
    b = np.unique(np.asarray(b), return_inverse=True)[1].reshape(-1)
    n = a.shape[0]
    if n == 0:
        return 0.0
    joint = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(joint, (a, b), 1.0)
    joint /= n
    pa = joint.sum(1, keepdims=True)
    pb = joint.sum(0, keepdims=True)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])))
    return max(mi, 0.0)


def mutual_info_scores(d: Dataset, n_bins: int = 10, **kw) -> FeatureReport:
    X = d.numeric_X()
    vals = [mutual_information(equal_frequency_bins(X[:, j], n_bins), d.y) for j in range(d.n_cols)]
    return make_report("mutual_info", d.names, vals, **kw)


def rf_importance_scores(d: Dataset, n_trees: int = 100, seed: int = 0, max_depth: int | None = 16,
                         **kw) -> FeatureReport:
    """Mean Gini decrease per feature over a random forest, normalised to sum to 1."""
    from .classifiers import ModelSpec, RandomForest

    if len(np.unique(d.y)) < 2:
        raise ValueError("forest importance needs both classes present")
    forest = RandomForest(ModelSpec("random_forest", {"n_trees": n_trees, "seed": seed,
                                                      "max_depth": max_depth}))
    forest.fit(d.numeric_X(), d.y)
    imp = forest.impurity_decrease
    total = imp.sum()
    if not total > 0:
        raise ValueError("no split reduced impurity; importances cannot be normalised")
    return make_report("rf_importance", d.names, imp / total, **kw)


def select_union(reports: Sequence[FeatureReport]) -> list[str]:
    """Union of the selected sets, in order of first appearance."""
    if not reports:
        raise ValueError("select_union needs at least one report")
    out: dict[str, None] = {}
    for r in reports:
        for f in r.selected:
            out.setdefault(f, None)
    return list(out)


def format_report(report: FeatureReport) -> str:
    """Tab-separated ``feature, score, selected`` rows, highest score first."""
    lines = [f"# scorer={report.scorer} threshold={report.threshold!r}", "feature\tscore\tselected"]
    chosen = set(report.selected)
    for name, score in report.ranked():
        lines.append(f"{name}\t{score!r}\t{int(name in chosen)}")
    return "\n".join(lines) + "\n"


def write_report(report: FeatureReport, path) -> None:
    Path(path).write_text(format_report(report), encoding="utf-8")


def read_report(path) -> FeatureReport:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta = dict(kv.split("=", 1) for kv in lines[0].lstrip("# ").split())
    scores, selected = {}, []
    for line in lines[2:]:
        name, score, sel = line.split("\t")
        scores[name] = float(score)
        if sel == "1":
            selected.append(name)
    return FeatureReport(meta["scorer"], scores, float(meta["threshold"]), tuple(selected))


def score_features(d: Dataset, scorers: Sequence[str] = SCORERS, *, n_bins: int = 10,
                   rf_trees: int = 100, rf_max_depth: int | None = 16, seed: int = 0,
                   thresholds: dict[str, float] | None = None,
                   threshold_fraction: float = DEFAULT_THRESHOLD_FRACTION) -> list[FeatureReport]:
    thresholds = thresholds or {}
    reports = []
    for s in scorers:
        kw = {"threshold": thresholds.get(s), "threshold_fraction": threshold_fraction}
        if s == "chi2":
            reports.append(chi2_scores(d, **kw))
        elif s == "mutual_info":
            reports.append(mutual_info_scores(d, n_bins=n_bins, **kw))
        elif s == "rf_importance":
            reports.append(rf_importance_scores(d, n_trees=rf_trees, seed=seed, max_depth=rf_max_depth, **kw))
        else:
            raise ValueError(f"unknown scorer {s!r}")
    return reports


# Reference per-scorer selections on Bot-IoT (7 + 8 + 10 names, 19 distinct);
# the printed spellings "ARP_Proto_P_Dport" and "TnP_Per_Proto" are mapped
# onto the schema names.
PUBLISHED_SELECTION = {
    "chi2": ("srate", "sport", "AR_P_Proto_P_Sport", "AR_P_Proto_P_SrcIP",
             "AR_P_Proto_P_DstIP", "rate", "AR_P_Proto_P_Dport"),
    "mutual_info": ("dport", "proto", "flgs", "state", "proto_number", "daddr",
                    "saddr", "flgs_number"),
    "rf_importance": ("ltime", "stime", "AR_P_Proto_P_DstIP", "AR_P_Proto_P_SrcIP",
                      "AR_P_Proto_P_Dport", "daddr", "AR_P_Proto_P_Sport", "rate",
                      "TnP_PerProto", "bytes"),
}
