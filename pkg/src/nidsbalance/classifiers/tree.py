"""CART growing on presorted feature orders.

Every feature is argsorted once per fit; each node keeps, per feature, the
row indices of its members in ascending feature order, and children inherit
those orders by a stable boolean partition. Split search is then a cumulative
sum over the node's rows, with no per-node sorting.

Two split criteria share the builder:

* ``"gini"`` -- weighted Gini impurity decrease on 0/1 targets, leaf value
  is the weighted fraction of class 1.
* ``"newton"`` -- second-order gain on per-row gradients/hessians (the
  regularised form used by XGBoost), leaf value ``-G / (H + reg_lambda)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF = -1


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray    # int, LEAF for leaves
    threshold: np.ndarray  # go left when x[feature] <= threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        rows = rows[self.feature[node] != LEAF]
        while rows.size:
            nd = node[rows]
            go_left = X[rows, self.feature[nd]] <= self.threshold[nd]
            nd = np.where(go_left, self.left[nd], self.right[nd])
            node[rows] = nd
            rows = rows[self.feature[nd] != LEAF]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}{k}": getattr(self, k) for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_arrays(cls, arrays, prefix: str) -> "Tree":
        return cls(*(np.asarray(arrays[f"{prefix}{k}"]) for k in ("feature", "threshold", "left", "right", "value")))


def presort(X: np.ndarray) -> list[np.ndarray]:
    return [np.argsort(X[:, f], kind="stable") for f in range(X.shape[1])]


def _best_split(xs, a, b, tot_a, tot_b, criterion, reg_lambda, min_leaf):
    """Best split position over one feature.

    ``a``/``b`` are the per-row statistics in feature order: (weight,
    weighted positives) for gini, (gradient, hessian) for newton. Returns
    (gain, position) with gain -inf when no admissible split exists.
    """
    m = xs.shape[0]
    if m < 2 * min_leaf:
        return -np.inf, -1
    ca = np.cumsum(a)[:-1]
    cb = np.cumsum(b)[:-1]
    ra = tot_a - ca
    rb = tot_b - cb
    with np.errstate(divide="ignore", invalid="ignore"):
        if criterion == "gini":
            # ca: left weight, cb: left positive weight
            score = (cb ** 2 + (ca - cb) ** 2) / ca + (rb ** 2 + (ra - rb) ** 2) / ra
            parent = (tot_b ** 2 + (tot_a - tot_b) ** 2) / tot_a
        else:
            score = ca ** 2 / (cb + reg_lambda) + ra ** 2 / (rb + reg_lambda)
            parent = tot_a ** 2 / (tot_b + reg_lambda)
    valid = xs[:-1] < xs[1:]
    if min_leaf > 1:
        pos = np.arange(1, m)
        valid &= (pos >= min_leaf) & (m - pos >= min_leaf)
    if criterion == "gini":
        valid &= (ca > 0) & (ra > 0)
    if not valid.any():
        return -np.inf, -1
    score = np.where(valid, score, -np.inf)
    k = int(np.argmax(score))
    return float(score[k] - parent), k


def grow(
    X: np.ndarray,
    order: list[np.ndarray],
    criterion: str,
    stat_a: np.ndarray,
    stat_b: np.ndarray,
    *,
    max_depth: int | None = None,
    min_samples_leaf: int = 1,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    reg_lambda: float = 1.0,
    importance: np.ndarray | None = None,
    member: np.ndarray | None = None,
) -> Tree:
    """Grow one tree.

    For ``"gini"``, ``stat_a`` is the row weight and ``stat_b`` the weight
    times the 0/1 label; rows with zero weight are excluded (bootstrap). For
    ``"newton"`` they are the gradient and hessian. ``importance`` (length
    D) accumulates the gain of every split on its feature.
    """
    if criterion not in ("gini", "newton"):
        raise ValueError(f"unknown criterion {criterion!r}")
    n, D = X.shape
    if max_features is None or max_features >= D:
        max_features = D
    if member is None:
        member = stat_a > 0 if criterion == "gini" else np.ones(n, dtype=bool)
    root = [o[member[o]] for o in order]

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    go_left = np.zeros(n, dtype=bool)

    def new_node(v: float) -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(v)
        return len(feature) - 1

    def leaf_value(ta, tb):
        if criterion == "gini":
            return tb / ta
        return -ta / (tb + reg_lambda)

    rows0 = root[0]
    ta0, tb0 = float(stat_a[rows0].sum()), float(stat_b[rows0].sum())
    stack = [(new_node(leaf_value(ta0, tb0) if rows0.size else 0.0), root, 0, ta0, tb0)]
    while stack:
        nid, lists, depth, ta, tb = stack.pop()
        m = lists[0].shape[0]
        if m < 2 or (max_depth is not None and depth >= max_depth):
            continue
        if criterion == "gini" and (tb <= 0.0 or tb >= ta):
            continue
        feats = rng.permutation(D) if (rng is not None and max_features < D) else np.arange(D)
        best_gain, best_f, best_k = -np.inf, -1, -1
        for count, f in enumerate(feats):
            if count >= max_features and best_f >= 0:
                break
            idx = lists[f]
            gain, k = _best_split(X[idx, f], stat_a[idx], stat_b[idx], ta, tb,
                                  criterion, reg_lambda, min_samples_leaf)
            if gain > best_gain:
                best_gain, best_f, best_k = gain, int(f), k
        if best_f < 0:
            continue
        if criterion == "gini":
            if best_gain < -1e-12 * max(ta, 1.0):
                continue
            best_gain = max(best_gain, 0.0)
        elif best_gain <= 1e-12:
            continue
        idx = lists[best_f]
        lo, hi = X[idx[best_k], best_f], X[idx[best_k + 1], best_f]
        thr = lo + (hi - lo) / 2.0
        if not lo <= thr < hi:
            thr = lo
        go_left[idx] = X[idx, best_f] <= thr
        l_lists = [o[go_left[o]] for o in lists]
        r_lists = [o[~go_left[o]] for o in lists]
        lrows = l_lists[0]
        la, lb = float(stat_a[lrows].sum()), float(stat_b[lrows].sum())
        rrows = r_lists[0]
        ra, rb = float(stat_a[rrows].sum()), float(stat_b[rrows].sum())
        if importance is not None:
            importance[best_f] += best_gain
        feature[nid] = best_f
        threshold[nid] = float(thr)
        left[nid] = new_node(leaf_value(la, lb))
        right[nid] = new_node(leaf_value(ra, rb))
        # right pushed first so the left subtree is expanded first
        stack.append((right[nid], r_lists, depth + 1, ra, rb))
        stack.append((left[nid], l_lists, depth + 1, la, lb))

    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=np.float64),
    )
