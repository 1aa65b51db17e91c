"""Seven binary classifiers behind one interface.

Every model exposes ``fit(X, y)``, ``decision_scores(X)`` and
``predict(X) == decision_scores(X) >= model.threshold`` (0.5 for the
probability-valued models, 0 for the margin-valued SVMs).
"""

from __future__ import annotations

from .base import (
    DEFAULTS,
    FOREST_1000_PRESET,
    KINDS,
    DivergenceError,
    Model,
    ModelSpec,
    NotFittedError,
    load_model,
    save_model,
)
from .ensemble import GradientBoostedTrees, RandomForest
from .linear import LinearSVC, LogisticRegression
from .mlp import MLP
from .svm import LinearKernelSVM, RBFKernelSVM

MODEL_CLASSES: dict[str, type[Model]] = {
    "logreg": LogisticRegression,
    "linear_svc": LinearSVC,
    "svm_linear_kernel": LinearKernelSVM,
    "svm_rbf_kernel": RBFKernelSVM,
    "random_forest": RandomForest,
    "gbt": GradientBoostedTrees,
    "mlp": MLP,
}


def _xy(d):
    return d.numeric_X(), d.y


def fit_model(d, spec: ModelSpec) -> Model:
    """Train the model described by ``spec`` on Dataset ``d``."""
    return MODEL_CLASSES[spec.kind](spec).fit(*_xy(d))


def _fit_as(kind):
    def fit(d, spec: ModelSpec | None = None) -> Model:
        spec = spec or ModelSpec(kind)
        if spec.kind != kind:
            raise ValueError(f"expected a {kind} spec, got {spec.kind}")
        return fit_model(d, spec)

    fit.__name__ = f"fit_{kind}"
    return fit


fit_logreg = _fit_as("logreg")
fit_linear_svc = _fit_as("linear_svc")
fit_random_forest = _fit_as("random_forest")
fit_gbt = _fit_as("gbt")
fit_mlp = _fit_as("mlp")


def fit_svm_smo(d, spec: ModelSpec | None = None, kernel: str = "rbf") -> Model:
    kind = {"linear": "svm_linear_kernel", "rbf": "svm_rbf_kernel"}[kernel]
    spec = spec or ModelSpec(kind)
    if spec.kind != kind:
        raise ValueError(f"kernel={kernel!r} needs a {kind} spec")
    return fit_model(d, spec)


def predict(m: Model, X):
    return m.predict(X)


def decision_scores(m: Model, X):
    return m.decision_scores(X)


__all__ = [
    "DEFAULTS", "FOREST_1000_PRESET", "KINDS", "MODEL_CLASSES", "DivergenceError", "Model",
    "ModelSpec", "NotFittedError", "GradientBoostedTrees", "LinearKernelSVM", "LinearSVC",
    "LogisticRegression", "MLP", "RBFKernelSVM", "RandomForest", "decision_scores",
    "fit_gbt", "fit_linear_svc", "fit_logreg", "fit_mlp", "fit_model", "fit_random_forest",
    "fit_svm_smo", "load_model", "predict", "save_model",
]
