"""Feed-forward network: ReLU hidden layers, sigmoid output, cross-entropy loss."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .base import DivergenceError, Model


def init_params(sizes, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """He-initialised (W, b) per layer for layer widths ``sizes`` (input first, 1 last)."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        params.append((W, np.zeros(fan_out)))
    return params


def forward(params, X) -> np.ndarray:
    """Output logits."""
    a = X
    for W, b in params[:-1]:
        a = np.maximum(a @ W + b, 0.0)
    W, b = params[-1]
    return (a @ W + b)[:, 0]


def loss_and_grad(params, X, y):
    """Mean binary cross-entropy and its gradient by backpropagation.

    Returns ``(loss, grads)`` with ``grads`` shaped like ``params``.
    """
    acts = [X]
    pre = []
    a = X
    for W, b in params[:-1]:
        z = a @ W + b
        pre.append(z)
        a = np.maximum(z, 0.0)
        acts.append(a)
    W, b = params[-1]
    logit = (a @ W + b)[:, 0]
    n = X.shape[0]
    loss = float(np.mean(np.logaddexp(0.0, logit) - y * logit))
    delta = ((expit(logit) - y) / n)[:, None]
    grads = [None] * len(params)
    for layer in range(len(params) - 1, -1, -1):
        W, _ = params[layer]
        grads[layer] = (acts[layer].T @ delta, delta.sum(0))
        if layer:
            delta = (delta @ W.T) * (pre[layer - 1] > 0)
    return loss, grads


class MLP(Model):
    """Mini-batch gradient descent with momentum; rows are reshuffled each epoch."""

    kind = "mlp"
    threshold = 0.5

    def _fit(self, X, y):
        rng = np.random.default_rng(self.hp["seed"])
        # train on centred inputs and fold the shift into the first bias afterwards
        shift = X.mean(axis=0)
        X = X - shift
        sizes = [X.shape[1], *map(int, self.hp["hidden"]), 1]
        params = init_params(sizes, rng)
        vel = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        eta = float(self.hp["learning_rate"])
        mu = float(self.hp["momentum"])
        bs = int(self.hp["batch_size"])
        yf = y.astype(np.float64)
        n = X.shape[0]
        history = []
        for epoch in range(int(self.hp["epochs"])):
            perm = rng.permutation(n)
            total = 0.0
            for start in range(0, n, bs):
                rows = perm[start:start + bs]
                with np.errstate(over="ignore", invalid="ignore"):
                    loss, grads = loss_and_grad(params, X[rows], yf[rows])
                if not np.isfinite(loss):
                    raise DivergenceError(f"mlp diverged in epoch {epoch}; lower learning_rate (={eta})")
                total += loss * rows.size
                new_params, new_vel = [], []
                for (W, b), (vW, vb), (gW, gb) in zip(params, vel, grads):
                    vW = mu * vW - eta * gW
                    vb = mu * vb - eta * gb
                    new_params.append((W + vW, b + vb))
                    new_vel.append((vW, vb))
                params, vel = new_params, new_vel
            history.append(total / n)
        W0, b0 = params[0]
        params[0] = (W0, b0 - shift @ W0)
        self.params = params
        self.loss_history = history
        self.metadata.update(epochs_run=int(self.hp["epochs"]),
                             final_loss=history[-1] if history else None)

    def _scores(self, X):
        return expit(forward(self.params, X))

    def _arrays(self):
        out = {}
        for i, (W, b) in enumerate(self.params):
            out[f"W{i}"], out[f"b{i}"] = W, b
        return out

    def _load_arrays(self, a):
        n_layers = sum(1 for k in a if k.startswith("W"))
        self.params = [(a[f"W{i}"], a[f"b{i}"]) for i in range(n_layers)]
