"""Random forest (bagged Gini CART, majority vote) and gradient-boosted trees."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit

from .base import Model
from .linear import logistic_loss
from .tree import Tree, grow, presort


def _max_features(setting, D: int) -> int:
    if setting in (None, "all"):
        return D
    if setting == "sqrt":
        return max(1, int(math.sqrt(D)))
    if setting == "log2":
        return max(1, int(math.log2(D))) if D > 1 else 1
    k = int(setting)
    if k < 1:
        raise ValueError("max_features must be >= 1")
    return min(k, D)


def _stack(trees: list[Tree]) -> dict[str, np.ndarray]:
    out = {"tree_sizes": np.array([t.n_nodes for t in trees], dtype=np.int64)}
    for k in ("feature", "threshold", "left", "right", "value"):
        out[k] = np.concatenate([getattr(t, k) for t in trees]) if trees else np.zeros(0)
    return out


def _unstack(a) -> list[Tree]:
    trees, start = [], 0
    for size in a["tree_sizes"]:
        sl = slice(start, start + int(size))
        trees.append(Tree(a["feature"][sl], a["threshold"][sl], a["left"][sl], a["right"][sl], a["value"][sl]))
        start += int(size)
    return trees


class RandomForest(Model):
    """Bootstrap-aggregated Gini trees with per-split feature subsampling.

    Each tree votes for class 1 when its leaf holds a weighted class-1
    fraction of at least 0.5; the score is the fraction of trees voting 1.
    ``impurity_decrease`` holds each feature's total Gini decrease averaged
    over trees (per-tree gains are normalised by the tree's root weight).
    """

    kind = "random_forest"
    threshold = 0.5

    def _fit(self, X, y):
        n, D = X.shape
        n_trees = int(self.hp["n_trees"])
        mf = _max_features(self.hp["max_features"], D)
        depth = self.hp["max_depth"]
        depth = None if depth is None else int(depth)
        order = presort(X)
        seeds = np.random.SeedSequence(self.hp["seed"]).spawn(n_trees)
        yf = y.astype(np.float64)
        self.trees = []
        imp = np.zeros(D)
        for ss in seeds:
            rng = np.random.default_rng(ss)
            if self.hp["bootstrap"]:
                w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
            else:
                w = np.ones(n)
            tree_imp = np.zeros(D)
            tree = grow(X, order, "gini", w, w * yf, max_depth=depth,
                        min_samples_leaf=int(self.hp["min_samples_leaf"]),
                        max_features=mf, rng=rng, importance=tree_imp)
            imp += tree_imp / w.sum()
            self.trees.append(tree)
        self.impurity_decrease = imp / n_trees
        self.metadata.update(n_trees=n_trees, max_features=mf,
                             mean_depth=float(np.mean([t.depth for t in self.trees])))

    def votes(self, X) -> np.ndarray:
        X = self._check_X(X)
        return np.stack([(t.predict(X) >= 0.5) for t in self.trees], axis=1).astype(np.int64)

    def _scores(self, X):
        total = np.zeros(X.shape[0])
        for t in self.trees:
            total += t.predict(X) >= 0.5
        return total / len(self.trees)

    def _arrays(self):
        out = _stack(self.trees)
        out["impurity_decrease"] = self.impurity_decrease
        return out

    def _load_arrays(self, a):
        self.trees = _unstack(a)
        self.impurity_decrease = a["impurity_decrease"]


class GradientBoostedTrees(Model):
    """Boosting on logistic loss with second-order (Newton) regression trees.

    Starts from the prior log-odds; each round fits a depth-limited tree to
    the loss gradients/hessians and adds ``shrinkage * leaf value``. A leaf
    whose step would raise that leaf's loss is halved until it does not, so
    the training loss never increases from one round to the next.
    """

    kind = "gbt"
    threshold = 0.5

    def _fit(self, X, y):
        n, D = X.shape
        yf = y.astype(np.float64)
        p0 = yf.mean()
        self.base_score = float(np.log(p0 / (1.0 - p0)))
        F = np.full(n, self.base_score)
        nu = float(self.hp["shrinkage"])
        depth = self.hp["max_depth"]
        depth = None if depth is None else int(depth)
        lam = float(self.hp["reg_lambda"])
        order = presort(X) if self.hp["n_rounds"] > 0 else None
        loss = logistic_loss(F, yf)
        self.loss_history = [float(loss.mean())]
        self.trees = []
        rises = 0
        warning = None
        for r in range(int(self.hp["n_rounds"])):
            p = expit(F)
            g, h = p - yf, p * (1.0 - p)
            tree = grow(X, order, "newton", g, h, max_depth=depth,
                        min_samples_leaf=int(self.hp["min_samples_leaf"]), reg_lambda=lam)
            leaf = tree.apply(X)
            step = nu * tree.value
            n_nodes = tree.n_nodes
            old = np.bincount(leaf, weights=loss, minlength=n_nodes)
            for _ in range(60):
                new_loss = logistic_loss(F + step[leaf], yf)
                new = np.bincount(leaf, weights=new_loss, minlength=n_nodes)
                bad = new > old
                if not bad.any():
                    break
                step = np.where(bad, step * 0.5, step)
            else:
                step = np.where(bad, 0.0, step)
                new_loss = logistic_loss(F + step[leaf], yf)
            tree = Tree(tree.feature, tree.threshold, tree.left, tree.right, step)
            F = F + step[leaf]
            loss = new_loss
            self.trees.append(tree)
            self.loss_history.append(float(loss.mean()))
            rises = rises + 1 if self.loss_history[-1] > self.loss_history[-2] else 0
            if rises >= 10:
                warning = f"loss rose for 10 consecutive rounds; stopped after round {r + 1}"
                break
        self.metadata.update(rounds_run=len(self.trees), final_loss=self.loss_history[-1],
                             early_stop_warning=warning)

    def raw_scores(self, X) -> np.ndarray:
        X = self._check_X(X)
        F = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            F += t.predict(X)
        return F

    def _scores(self, X):
        return expit(self.raw_scores(X))

    def _arrays(self):
        out = _stack(self.trees)
        out["base_score"] = np.array(self.base_score)
        out["loss_history"] = np.array(self.loss_history)
        return out

    def _load_arrays(self, a):
        self.trees = _unstack(a)
        self.base_score = float(a["base_score"])
        self.loss_history = list(a["loss_history"])
