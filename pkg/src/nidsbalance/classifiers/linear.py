"""Full-batch logistic regression and primal hinge-loss linear SVM."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .base import DivergenceError, Model


def logistic_loss(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-row negative log-likelihood for logits ``z`` and 0/1 labels."""
    with np.errstate(invalid="ignore"):  # inf - inf while diverging; caught by callers
        return np.logaddexp(0.0, z) - y * z


class LogisticRegression(Model):
    """Maximum-likelihood logistic regression with an L2 penalty, trained by
    full-batch gradient steps. Scores are probabilities of the attack class."""

    kind = "logreg"
    threshold = 0.5

    def _fit(self, X, y):
        eta, lam = float(self.hp["learning_rate"]), float(self.hp["l2"])
        n, D = X.shape
        # optimise on centred features; w.(x - mu) + b is the same model with
        # bias b - w.mu, but the bias no longer fights the weights
        mu = X.mean(axis=0)
        X = X - mu
        w = np.zeros(D)
        b = 0.0
        yf = y.astype(np.float64)
        loss = np.nan
        for epoch in range(int(self.hp["epochs"])):
            z = X @ w + b
            loss = float(logistic_loss(z, yf).mean() + lam * (w @ w))
            if not np.isfinite(loss):
                raise DivergenceError(f"logreg diverged at epoch {epoch}; lower learning_rate (={eta})")
            r = expit(z) - yf
            with np.errstate(over="ignore", invalid="ignore"):
                w -= eta * (X.T @ r / n + 2.0 * lam * w)
            b -= eta * r.mean()
        if not (np.isfinite(w).all() and np.isfinite(b)):
            raise DivergenceError(f"logreg weights non-finite; lower learning_rate (={eta})")
        self.w, self.b = w, float(b - w @ mu)
        self.metadata.update(epochs_run=int(self.hp["epochs"]), final_loss=loss)

    def _scores(self, X):
        return expit(X @ self.w + self.b)

    def _arrays(self):
        return {"w": self.w, "b": np.array(self.b)}

    def _load_arrays(self, a):
        self.w, self.b = a["w"], float(a["b"])


class LinearSVC(Model):
    """Soft-margin linear SVM on the primal objective
    ``mean(max(0, 1 - y (w.x + b))) + l2 * |w|^2``.

    Deterministic full-batch subgradient descent with step
    ``learning_rate / (1 + t)``; the L2 term is applied as an exact proximal
    shrink, so very large penalties cannot overshoot.
    """

    kind = "linear_svc"
    threshold = 0.0

    def _fit(self, X, y):
        eta0, lam = float(self.hp["learning_rate"]), float(self.hp["l2"])
        n, D = X.shape
        mu = X.mean(axis=0)  # centred, as in LogisticRegression
        X = X - mu
        s = 2.0 * y - 1.0
        w = np.zeros(D)
        b = 0.0
        obj = np.nan
        for t in range(int(self.hp["epochs"])):
            margin = s * (X @ w + b)
            obj = float(np.maximum(0.0, 1.0 - margin).mean() + lam * (w @ w))
            if not np.isfinite(obj):
                raise DivergenceError(f"linear_svc diverged at epoch {t}; lower learning_rate (={eta0})")
            active = margin < 1.0
            sa = s[active]
            gw = -(X[active].T @ sa) / n
            gb = -sa.sum() / n
            eta = eta0 / (1.0 + t)
            w = (w - eta * gw) / (1.0 + 2.0 * eta * lam)
            b -= eta * gb
        self.w, self.b = w, float(b - w @ mu)
        self.metadata.update(epochs_run=int(self.hp["epochs"]), final_loss=obj)

    def _scores(self, X):
        return X @ self.w + self.b

    def _arrays(self):
        return {"w": self.w, "b": np.array(self.b)}

    def _load_arrays(self, a):
        self.w, self.b = a["w"], float(a["b"])
