"""Hold-out splitting, confusion counts, metrics, ROC/AUC and inference timing.

Attack (label 1) is the positive class throughout.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset

# per-class training counts observed for the Bot-IoT split (324 normal,
# 2,457,583 attack); the default rule floor(0.67 * n) gives 319 normal rows
BOT_IOT_EXACT_TRAIN_COUNTS = {0: 324, 1: 2_457_583}

METRIC_ORDER = ("accuracy", "recall", "precision", "fnr", "fpr", "f1", "auc", "inference_seconds")


def holdout_split(d: Dataset, train_fraction: float = 0.67, stratified: bool = True, seed: int = 0,
                  train_counts: dict[int, int] | None = None) -> tuple[Dataset, Dataset]:
    """Disjoint train/test partition.

    Stratified splits take ``floor(train_fraction * n_c)`` random rows of each
    class ``c`` for training, or exactly ``train_counts[c]`` when given. Both
    outputs keep the input row order.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    is_train = np.zeros(d.n_rows, dtype=bool)
    if stratified or train_counts:
        for c in (0, 1):
            rows = np.flatnonzero(d.y == c)
            if rows.size == 0:
                continue
            if stratified and rows.size < 2:
                raise ValueError(f"class {c} has {rows.size} row(s); stratification needs >= 2")
            if train_counts and c in train_counts:
                k = int(train_counts[c])
                if not 0 <= k <= rows.size:
                    raise ValueError(f"cannot take {k} training rows from {rows.size} of class {c}")
            else:
                k = int(np.floor(train_fraction * rows.size))
            is_train[rng.permutation(rows)[:k]] = True
    else:
        k = int(np.floor(train_fraction * d.n_rows))
        is_train[rng.permutation(d.n_rows)[:k]] = True
    return d.take(np.flatnonzero(is_train)), d.take(np.flatnonzero(~is_train))


@dataclass(frozen=True)
class Confusion:
    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def n(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


def confusion(y_true, y_pred) -> Confusion:
    t = np.asarray(y_true).reshape(-1)
    p = np.asarray(y_pred).reshape(-1)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape[0]} labels vs {p.shape[0]} predictions")
    t, p = t == 1, p == 1
    return Confusion(int(np.sum(t & p)), int(np.sum(t & ~p)), int(np.sum(~t & p)), int(np.sum(~t & ~p)))


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    recall: float
    precision: float
    fnr: float
    fpr: float
    f1: float
    # metrics whose denominator was zero (reported as 0)
    undefined: tuple[str, ...] = ()


def _ratio(num, den, name, undefined):
    if den == 0:
        undefined.append(name)
        return 0.0
    return num / den


def metrics(c: Confusion) -> Metrics:
    undefined: list[str] = []
    acc = _ratio(c.tp + c.tn, c.n, "accuracy", undefined)
    rec = _ratio(c.tp, c.tp + c.fn, "recall", undefined)
    prec = _ratio(c.tp, c.tp + c.fp, "precision", undefined)
    fnr = _ratio(c.fn, c.tp + c.fn, "fnr", undefined)
    fpr = _ratio(c.fp, c.fp + c.tn, "fpr", undefined)
    f1 = _ratio(2 * prec * rec, prec + rec, "f1", undefined)
    return Metrics(acc, rec, prec, fnr, fpr, f1, tuple(undefined))


def roc_auc(y_true, scores) -> tuple[np.ndarray, float]:
    """ROC points (fpr, tpr) from a descending sweep over distinct scores and
    the trapezoidal area under them. Tied scores move in one diagonal step."""
    y = np.asarray(y_true).reshape(-1) == 1
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if y.shape != s.shape:
        raise ValueError("labels and scores differ in length")
    P, N = int(y.sum()), int((~y).sum())
    if P == 0 or N == 0:
        raise ValueError("ROC needs both classes in y_true")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    tp = np.cumsum(y)[last]
    fp = np.cumsum(~y)[last]
    tpr = np.r_[0.0, tp / P]
    fpr = np.r_[0.0, fp / N]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return np.column_stack([fpr, tpr]), auc


@dataclass(frozen=True)
class Timing:
    seconds: float  # median over runs
    runs: int
    variance: float
    samples: tuple[float, ...] = ()


def time_inference(model, X, runs: int = 3) -> Timing:
    """Median wall-clock seconds of ``model.predict(X)`` on one thread, after an untimed warm-up."""
    from threadpoolctl import threadpool_limits

    X = np.asarray(X, dtype=np.float64)
    with threadpool_limits(limits=1):
        model.predict(X)
        samples = []
        for _ in range(runs):
            t0 = time.perf_counter()
            model.predict(X)
            samples.append(time.perf_counter() - t0)
    var = statistics.variance(samples) if len(samples) > 1 else 0.0
    return Timing(statistics.median(samples), runs, var, tuple(samples))


@dataclass(frozen=True)
class EvalReport:
    confusion: Confusion
    accuracy: float
    recall: float
    precision: float
    fnr: float
    fpr: float
    f1: float
    auc: float
    inference_seconds: float | None
    roc_points: np.ndarray = field(repr=False)
    timing_runs: int = 0
    timing_variance: float = 0.0
    undefined: tuple[str, ...] = ()

    def row(self) -> dict:
        d = {k: getattr(self, k) for k in METRIC_ORDER}
        d.update(asdict(self.confusion))
        return d


def evaluate(model, X, y, measure_time: bool = True, timing_runs: int = 3) -> EvalReport:
    scores = model.decision_scores(X)
    pred = (scores >= model.threshold).astype(np.int64)
    c = confusion(y, pred)
    m = metrics(c)
    points, auc = roc_auc(y, scores)
    timing = time_inference(model, X, timing_runs) if measure_time else None
    return EvalReport(
        confusion=c, accuracy=m.accuracy, recall=m.recall, precision=m.precision, fnr=m.fnr,
        fpr=m.fpr, f1=m.f1, auc=auc, roc_points=points,
        inference_seconds=None if timing is None else timing.seconds,
        timing_runs=0 if timing is None else timing.runs,
        timing_variance=0.0 if timing is None else timing.variance,
        undefined=m.undefined,
    )
