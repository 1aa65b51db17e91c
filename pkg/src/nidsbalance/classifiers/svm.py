"""Kernel SVM trained on the dual by sequential minimal optimization.

The solver minimises ``f(c) = 1/2 c'Qc - sum(c)`` with ``Q_ij = y_i y_j K_ij``
subject to ``sum(c_i y_i) = 0`` and ``0 <= c_i <= C``, which is the usual
dual maximisation with the sign flipped. Each step picks the maximal
violating index ``i`` and the partner ``j`` with the largest second-order
decrease (Fan, Chen & Lin 2005), solves the two-variable subproblem in
closed form and updates the gradient from two kernel rows. It stops when
the KKT gap ``max_{I_up} -y G - min_{I_low} -y G`` drops below ``tol``.
"""

from __future__ import annotations

import logging
from collections import OrderedDict

import numpy as np

from .base import Model, stratified_cap

log = logging.getLogger(__name__)

TAU = 1e-12


def linear_kernel(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B.T


def rbf_kernel(A: np.ndarray, B: np.ndarray, sigma2: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * sigma2))


class _KernelRows:
    """Kernel rows of the training set, fully precomputed when it fits in the
    budget, otherwise computed on demand behind an LRU cache."""

    def __init__(self, X, kernel, max_rows: int):
        self.X = X
        self.kernel = kernel
        n = X.shape[0]
        self.full = kernel(X, X) if n <= max_rows else None
        self.cache: OrderedDict[int, np.ndarray] = OrderedDict()
        self.max_rows = max(2, max_rows * max_rows // max(n, 1))
        if self.full is not None:
            self.diag = np.diag(self.full).copy()
        else:
            self.diag = np.array([kernel(X[i:i + 1], X[i:i + 1])[0, 0] for i in range(n)])

    def row(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        r = self.cache.get(i)
        if r is None:
            r = self.kernel(self.X[i:i + 1], self.X)[0]
            self.cache[i] = r
            if len(self.cache) > self.max_rows:
                self.cache.popitem(last=False)
        else:
            self.cache.move_to_end(i)
        return r


def smo(K: _KernelRows, s: np.ndarray, C: float, tol: float, max_iter: int, track_objective: bool = True):
    """Run SMO; returns (coef, gradient, info dict). ``s`` holds labels in {-1, +1}."""
    n = s.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    objective = [0.0] if track_objective else None
    pos = s > 0
    it = 0
    gap = np.inf
    while it < max_iter:
        below = alpha < C
        above = alpha > 0
        up = (below & pos) | (above & ~pos)
        low = (below & ~pos) | (above & pos)
        v = -s * G
        v_up = np.where(up, v, -np.inf)
        v_low = np.where(low, v, np.inf)
        i = int(np.argmax(v_up))
        m, M = v_up[i], v_low.min()
        gap = m - M
        if gap < tol:
            break
        Ki = K.row(i)
        # second-order choice of j among I_low violators
        b_ij = m - v
        a_ij = K.diag[i] + K.diag - 2.0 * Ki
        a_ij = np.where(a_ij > 0, a_ij, TAU)
        cand = low & (v < m)
        gain = np.where(cand, -(b_ij * b_ij) / a_ij, np.inf)
        j = int(np.argmin(gain))
        Kj = K.row(j)
        ai, aj = alpha[i], alpha[j]
        yi, yj = s[i], s[j]
        Kij = Ki[j]
        if yi != yj:
            quad = K.diag[i] + K.diag[j] - 2.0 * Kij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = K.diag[i] + K.diag[j] - 2.0 * Kij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        di, dj = ni - ai, nj - aj
        alpha[i], alpha[j] = ni, nj
        # Q_i = s_i * s * K_i
        G += (di * yi) * s * Ki + (dj * yj) * s * Kj
        it += 1
        if track_objective:
            objective.append(float(-0.5 * alpha @ (G - 1.0)))
    converged = gap < tol
    if not converged:
        log.warning("SMO stopped at max_iter=%d with KKT gap %.3g", max_iter, gap)
    info = {"iterations": it, "kkt_gap": float(gap), "converged": bool(converged)}
    if track_objective:
        info["dual_objective"] = objective
    return alpha, G, info


class _KernelSVM(Model):
    threshold = 0.0
    kernel_name = ""

    def _kernel(self):
        raise NotImplementedError

    def _fit(self, X, y):
        C = float(self.hp["C"])
        cap = self.hp["max_train_rows"]
        if cap is not None and X.shape[0] > cap:
            rows = stratified_cap(y, int(cap), np.random.default_rng(self.hp["seed"]))
            if np.unique(y[rows]).size < 2:
                raise ValueError("row cap left a single class")
            X, y = X[rows], y[rows]
        s = 2.0 * y - 1.0
        K = _KernelRows(X, self._kernel(), int(self.hp["cache_rows"]))
        alpha, G, info = smo(K, s, C, float(self.hp["tol"]), int(self.hp["max_iter"]),
                             track_objective=bool(self.hp["track_objective"]))
        sv = alpha > 0
        free = sv & (alpha < C)
        # b = w.x_i - y_i on margin vectors, i.e. s_i * G_i
        pick = free if free.any() else sv
        b = float(np.mean(s[pick] * G[pick])) if pick.any() else 0.0
        self.sv_X = X[sv].copy()
        self.sv_coef = (alpha[sv] * s[sv]).copy()
        self.sv_index = np.flatnonzero(sv)
        self.b = b
        self.dual_objective = info.pop("dual_objective", None)
        self.metadata.update(info, n_support=int(sv.sum()), n_free=int(free.sum()),
                             b_from="margin" if free.any() else "all_support_vectors",
                             equality_residual=float(abs(np.sum(alpha * s))),
                             n_train=int(X.shape[0]))
        self.alpha = alpha

    def _scores(self, X):
        kern = self._kernel()
        out = np.empty(X.shape[0])
        step = max(1, 2_000_000 // max(self.sv_X.shape[0], 1))
        for start in range(0, X.shape[0], step):
            blk = X[start:start + step]
            out[start:start + step] = kern(blk, self.sv_X) @ self.sv_coef
        return out - self.b

    def _arrays(self):
        return {"sv_X": self.sv_X, "sv_coef": self.sv_coef, "b": np.array(self.b)}

    def _load_arrays(self, a):
        self.sv_X, self.sv_coef, self.b = a["sv_X"], a["sv_coef"], float(a["b"])


class LinearKernelSVM(_KernelSVM):
    kind = "svm_linear_kernel"

    @property
    def w(self) -> np.ndarray:
        return self.sv_coef @ self.sv_X

    def _kernel(self):
        return linear_kernel


class RBFKernelSVM(_KernelSVM):
    """RBF kernel ``exp(-|x - x'|^2 / (2 sigma2))``; ``sigma2`` defaults to the feature count."""

    kind = "svm_rbf_kernel"

    @property
    def sigma2(self) -> float:
        s2 = self.hp.get("sigma2")
        return float(self.n_features if s2 is None else s2)

    def _kernel(self):
        s2 = self.sigma2
        return lambda A, B: rbf_kernel(A, B, s2)
