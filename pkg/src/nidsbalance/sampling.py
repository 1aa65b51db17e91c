"""Class rebalancing: SMOTE, random over-sampling and random under-sampling.

All samplers return a new Dataset whose leading rows are the untouched input
rows (for under-sampling, the surviving subset in input order). Synthetic
SMOTE rows carry ``row_id == -1``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset


@dataclass(frozen=True)
class SmoteConfig:
    k: int = 5
    target_ratio: float = 1.0
    seed: int = 0
    # one interpolation weight per synthetic row instead of one per coordinate
    scalar_gamma: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 < self.target_ratio <= 1.0:
            raise ValueError("target_ratio must be in (0, 1]")


@dataclass(frozen=True)
class Provenance:
    """Origin of each synthetic row: ``row = X[base] + gamma * (X[neighbor] - X[base])``
    where ``base``/``neighbor`` index rows of the sampler's input."""

    base: np.ndarray
    neighbor: np.ndarray
    gamma: np.ndarray

    def __len__(self):
        return self.base.shape[0]

    def lines(self) -> list[str]:
        out = []
        for i, l, g in zip(self.base, self.neighbor, self.gamma):
            digest = hashlib.sha256(np.ascontiguousarray(g, dtype="<f8").tobytes()).hexdigest()[:16]
            out.append(f"({int(i)}, {int(l)}, {digest})")
        return out

    def write(self, path) -> None:
        Path(path).write_text("".join(line + "\n" for line in self.lines()), encoding="utf-8")


def class_roles(y: np.ndarray) -> tuple[int, int]:
    """(minority label, majority label); equal counts make class 0 the minority."""
    n1 = int(np.sum(y == 1))
    n0 = y.shape[0] - n1
    if n0 == 0 or n1 == 0:
        raise ValueError("sampling needs both classes present")
    return (0, 1) if n0 <= n1 else (1, 0)


def target_minority_count(n_majority: int, target_ratio: float) -> int:
    # round half up; Python's round() is banker's rounding
    return int(math.floor(target_ratio * n_majority + 0.5))


def knn_minority(X_min: np.ndarray, k: int) -> np.ndarray:
    """Indices of each row's ``k`` nearest other rows by Euclidean distance.

    Exact brute force; ties go to the lower index, and a row is never its
    own neighbour even when duplicated.
    """
    X_min = np.asarray(X_min, dtype=np.float64)
    n = X_min.shape[0]
    if n <= k:
        raise ValueError(f"{n} minority rows cannot supply k={k} neighbours; lower k below {n}")
    out = np.empty((n, k), dtype=np.int64)
    chunk = max(1, 20_000_000 // max(n * X_min.shape[1], 1))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        diff = X_min[start:stop, None, :] - X_min[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        out[start:stop] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def smote(d: Dataset, cfg: SmoteConfig = SmoteConfig(), return_provenance: bool = False):
    """Append synthetic minority rows until the minority count reaches
    ``round(target_ratio * majority count)``.

    Each minority row seeds ``floor(N)`` synthetics and a uniformly drawn
    subset seeds one more, so the target is met exactly. A synthetic row is
    ``x_i + gamma * (x_l - x_i)`` with ``x_l`` drawn uniformly from the k
    nearest minority neighbours of ``x_i`` and ``gamma`` uniform on [0, 1)
    per coordinate.
    """
    X = d.numeric_X()
    minority, _ = class_roles(d.y)
    min_rows = np.flatnonzero(d.y == minority)
    n_min = min_rows.size
    n_syn = target_minority_count(d.n_rows - n_min, cfg.target_ratio) - n_min
    rng = np.random.default_rng(cfg.seed)
    if n_syn <= 0:
        empty = Provenance(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros((0, d.n_cols)))
        return (d, empty) if return_provenance else d
    X_min = X[min_rows]
    nn = knn_minority(X_min, cfg.k)
    per, rem = divmod(n_syn, n_min)
    counts = np.full(n_min, per, dtype=np.int64)
    counts[rng.choice(n_min, size=rem, replace=False)] += 1
    base = np.repeat(np.arange(n_min), counts)
    nbr = nn[base, rng.integers(0, cfg.k, size=n_syn)]
    width = 1 if cfg.scalar_gamma else d.n_cols
    gamma = rng.random((n_syn, width))
    synth = X_min[base] + gamma * (X_min[nbr] - X_min[base])
    out = Dataset(
        d.columns,
        np.vstack([X, synth]),
        np.concatenate([d.y, np.full(n_syn, minority)]),
        np.concatenate([d.row_ids, np.full(n_syn, -1)]),
    )
    if return_provenance:
        return out, Provenance(min_rows[base], min_rows[nbr], np.broadcast_to(gamma, synth.shape).copy())
    return out


def random_oversample(d: Dataset, target_ratio: float = 1.0, seed: int = 0) -> Dataset:
    """Append minority rows drawn uniformly with replacement."""
    if not 0 < target_ratio <= 1.0:
        raise ValueError("target_ratio must be in (0, 1]")
    minority, _ = class_roles(d.y)
    min_rows = np.flatnonzero(d.y == minority)
    n_add = target_minority_count(d.n_rows - min_rows.size, target_ratio) - min_rows.size
    if n_add <= 0:
        return d
    rng = np.random.default_rng(seed)
    dup = rng.choice(min_rows, size=n_add, replace=True)
    return d.take(np.concatenate([np.arange(d.n_rows), dup]))


def random_undersample(d: Dataset, target_ratio: float = 1.0, seed: int = 0) -> Dataset:
    """Keep a uniform subset of majority rows so minority/majority = ``target_ratio``."""
    if not target_ratio > 0:
        raise ValueError("target_ratio must be > 0")
    minority, majority = class_roles(d.y)
    min_rows = np.flatnonzero(d.y == minority)
    maj_rows = np.flatnonzero(d.y == majority)
    keep = int(math.floor(min_rows.size / target_ratio + 0.5))
    if keep > maj_rows.size:
        raise ValueError(f"ratio {target_ratio} needs {keep} majority rows but only "
                         f"{maj_rows.size} exist")
    rng = np.random.default_rng(seed)
    survivors = rng.choice(maj_rows, size=keep, replace=False)
    return d.take(np.sort(np.concatenate([min_rows, survivors])))


def resample(d: Dataset, mode: str, cfg: SmoteConfig = SmoteConfig()) -> Dataset:
    """Dispatch on ``mode`` in {none, smote, ros, rus}."""
    if mode == "none":
        return d
    if mode == "smote":
        return smote(d, cfg)
    if mode == "ros":
        return random_oversample(d, cfg.target_ratio, cfg.seed)
    if mode == "rus":
        return random_undersample(d, cfg.target_ratio, cfg.seed)
    raise ValueError(f"unknown sampling mode {mode!r}")
