"""Column dropping, one-hot encoding and min-max scaling fitted on training rows."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import CATEGORICAL, NUMERIC, ONE_HOT, Column, Dataset

# Row identifiers and Argus duration aggregates carry no network semantics.
DEFAULT_DROP = ("pkSeqID", "seq", "dur", "mean", "stddev", "sum", "min", "max")
DEFAULT_CATEGORICAL = ("flgs", "proto", "saddr", "sport", "daddr", "dport", "state")
DEFAULT_MAX_CATEGORIES = 64
OVERFLOW = "__other__"
FORMAT_VERSION = 1


class FitError(ValueError):
    pass


def category_key(v) -> str:
    """Canonical string for a categorical cell (80, 80.0 and "80" coincide)."""
    if isinstance(v, str):
        return v
    f = float(v)
    if f.is_integer():
        return str(int(f))
    return repr(f)


def indicator_name(column: str, category: str) -> str:
    return f"{column}={category}"


@dataclass(frozen=True)
class Preprocessor:
    input_columns: tuple[Column, ...]
    dropped: tuple[str, ...]
    one_hot_maps: dict[str, tuple[str, ...]]
    minmax_stats: dict[str, tuple[float, float]]

    @property
    def output_columns(self) -> tuple[Column, ...]:
        out = []
        for c in self.input_columns:
            if c.name in self.dropped:
                continue
            if c.name in self.one_hot_maps:
                for cat in self.one_hot_maps[c.name] + (OVERFLOW,):
                    out.append(Column(indicator_name(c.name, cat), ONE_HOT, source=c.name))
            else:
                out.append(Column(c.name, c.kind if c.kind == ONE_HOT else NUMERIC, source=c.source))
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "input_columns": [[c.name, c.kind, c.source] for c in self.input_columns],
            "dropped": list(self.dropped),
            "one_hot_maps": {k: list(v) for k, v in self.one_hot_maps.items()},
            "minmax_stats": {k: list(v) for k, v in self.minmax_stats.items()},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Preprocessor":
        if obj.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported preprocessor version {obj.get('version')!r}")
        return cls(
            input_columns=tuple(Column(n, k, s) for n, k, s in obj["input_columns"]),
            dropped=tuple(obj["dropped"]),
            one_hot_maps={k: tuple(v) for k, v in obj["one_hot_maps"].items()},
            minmax_stats={k: (float(a), float(b)) for k, (a, b) in obj["minmax_stats"].items()},
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Preprocessor":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit(
    train: Dataset,
    categorical_columns: Sequence[str] = DEFAULT_CATEGORICAL,
    max_categories: int = DEFAULT_MAX_CATEGORIES,
    drop: Sequence[str] = DEFAULT_DROP,
) -> Preprocessor:
    """Learn category vocabularies and min/max ranges from ``train``.

    Drop names absent from ``train`` are ignored. Columns whose kind is
    categorical are one-hot encoded even when not listed. Vocabularies are
    ordered most-frequent first (ties in order of first appearance) and
    capped at ``max_categories``; every encoded column also gets an
    ``__other__`` indicator that catches the remainder and unseen values.
    """
    names = train.names
    unknown = [c for c in categorical_columns if c not in names]
    if unknown:
        raise FitError(f"categorical columns not in dataset: {unknown}")
    if max_categories < 1:
        raise FitError("max_categories must be >= 1")
    dropped = tuple(n for n in drop if n in names)
    listed = set(categorical_columns)
    maps: dict[str, tuple[str, ...]] = {}
    stats: dict[str, tuple[float, float]] = {}
    for j, c in enumerate(train.columns):
        if c.name in dropped:
            continue
        col = train.X[:, j]
        if c.kind == CATEGORICAL or c.name in listed:
            counts = Counter(category_key(v) for v in col)
            maps[c.name] = tuple(k for k, _ in counts.most_common(max_categories))
        elif c.kind == NUMERIC:
            if train.n_rows == 0:
                raise FitError(f"numeric column {c.name!r} has no rows to fit on")
            v = col.astype(np.float64)
            stats[c.name] = (float(v.min()), float(v.max()))
    return Preprocessor(train.columns, dropped, maps, stats)


def transform(p: Preprocessor, d: Dataset) -> Dataset:
    """Apply a fitted Preprocessor. Test-time values outside the fitted range
    are clamped to [0, 1]; constant training columns map to 0."""
    if d.names != [c.name for c in p.input_columns]:
        raise ValueError("dataset columns do not match the fitted preprocessor "
                         "(already transformed, or a different schema)")
    out_cols = p.output_columns
    out = np.zeros((d.n_rows, len(out_cols)), dtype=np.float64)
    k = 0
    for j, c in enumerate(p.input_columns):
        if c.name in p.dropped:
            continue
        col = d.X[:, j]
        if c.name in p.one_hot_maps:
            cats = p.one_hot_maps[c.name]
            lookup = {cat: i for i, cat in enumerate(cats)}
            overflow = len(cats)
            idx = np.fromiter((lookup.get(category_key(v), overflow) for v in col),
                              dtype=np.int64, count=d.n_rows)
            out[np.arange(d.n_rows), k + idx] = 1.0
            k += overflow + 1
        elif c.name in p.minmax_stats:
            lo, hi = p.minmax_stats[c.name]
            v = col.astype(np.float64)
            if hi > lo:
                out[:, k] = np.clip((v - lo) / (hi - lo), 0.0, 1.0)
            k += 1
        else:
            out[:, k] = col.astype(np.float64)
            k += 1
    return Dataset(out_cols, out, d.y, d.row_ids)


def fit_transform(train: Dataset, **kw) -> tuple[Preprocessor, Dataset]:
    p = fit(train, **kw)
    return p, transform(p, train)
