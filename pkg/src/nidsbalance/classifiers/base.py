from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KINDS = (
    "logreg",
    "linear_svc",
    "svm_linear_kernel",
    "svm_rbf_kernel",
    "random_forest",
    "gbt",
    "mlp",
)

DEFAULTS: dict[str, dict] = {
    "logreg": {"learning_rate": 0.1, "epochs": 200, "l2": 1e-4},
    "linear_svc": {"learning_rate": 0.1, "epochs": 200, "l2": 1e-4},
    "svm_linear_kernel": {"C": 1.0, "tol": 1e-3, "max_iter": 1_000_000,
                          "max_train_rows": None, "cache_rows": 5000, "track_objective": True},
    "svm_rbf_kernel": {"C": 1.0, "tol": 1e-3, "max_iter": 1_000_000, "sigma2": None,
                       "max_train_rows": None, "cache_rows": 5000, "track_objective": True},
    "random_forest": {"n_trees": 100, "max_depth": 16, "max_features": "sqrt",
                      "bootstrap": True, "min_samples_leaf": 1},
    "gbt": {"n_rounds": 100, "max_depth": 3, "shrinkage": 0.1, "reg_lambda": 1.0,
            "min_samples_leaf": 1},
    "mlp": {"hidden": (64, 32), "learning_rate": 0.05, "momentum": 0.9, "epochs": 50,
            "batch_size": 256},
}

# the forest size reported for the original Bot-IoT runs; too slow as a default
FOREST_1000_PRESET = {"n_trees": 1000}

# hyperparameters that may legitimately be zero / None / non-numeric
_OPTIONAL = {"max_train_rows", "sigma2", "max_depth", "seed"}
_NONNEGATIVE = {"n_rounds", "momentum"}
_NON_NUMERIC = {"max_features", "bootstrap", "hidden", "track_objective"}

FORMAT = "nidsbalance-model"
FORMAT_VERSION = 1


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


class NotFittedError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        unknown = set(self.hyperparameters) - set(DEFAULTS[self.kind]) - {"seed"}
        if unknown:
            raise ValueError(f"unknown hyperparameters for {self.kind}: {sorted(unknown)}")
        for k, v in self.resolved().items():
            if k in _NON_NUMERIC or (k in _OPTIONAL and v is None) or k == "seed":
                continue
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"{self.kind}.{k} must be a finite number, got {v!r}")
            if k in _NONNEGATIVE:
                if v < 0:
                    raise ValueError(f"{self.kind}.{k} must be >= 0")
            elif v <= 0:
                raise ValueError(f"{self.kind}.{k} must be > 0")
        if self.kind == "mlp":
            hidden = tuple(self.resolved()["hidden"])
            if not hidden or any(int(h) < 1 for h in hidden):
                raise ValueError("mlp needs at least one hidden layer of positive width")

    def resolved(self) -> dict:
        out = dict(DEFAULTS[self.kind])
        out.setdefault("seed", 0)
        out.update(self.hyperparameters)
        return out

    def to_dict(self) -> dict:
        hp = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.hyperparameters.items()}
        return {"kind": self.kind, "hyperparameters": hp}

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelSpec":
        hp = dict(obj.get("hyperparameters", {}))
        if "hidden" in hp:
            hp["hidden"] = tuple(hp["hidden"])
        return cls(obj["kind"], hp)


def check_training_data(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, D) with one label per row")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    if np.unique(y).size < 2:
        raise ValueError("training data must contain both classes")
    return X, y


def stratified_cap(y: np.ndarray, n_max: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted row indices of a class-proportional subsample of at most about
    ``n_max`` rows; every class present keeps at least one row."""
    n = y.shape[0]
    if n <= n_max:
        return np.arange(n)
    keep = []
    for c in (0, 1):
        rows = np.flatnonzero(y == c)
        if rows.size:
            k = max(1, int(np.floor(n_max * rows.size / n)))
            keep.append(rng.choice(rows, size=k, replace=False))
    return np.sort(np.concatenate(keep))


class Model:
    """Trained binary classifier: ``predict`` is ``decision_scores >= threshold``."""

    kind: str = ""
    threshold: float = 0.0

    def __init__(self, spec: ModelSpec | None = None, **hyperparameters):
        if spec is None:
            spec = ModelSpec(self.kind, hyperparameters)
        elif hyperparameters:
            raise TypeError("pass either a ModelSpec or keyword hyperparameters")
        if spec.kind != self.kind:
            raise ValueError(f"{type(self).__name__} cannot take a {spec.kind!r} spec")
        self.spec = spec
        self.hp = spec.resolved()
        self.n_features: int | None = None
        self.metadata: dict = {"seed": self.hp["seed"]}

    def fit(self, X, y) -> "Model":
        X, y = check_training_data(X, y)
        self.n_features = X.shape[1]
        self._fit(X, y)
        return self

    def _check_X(self, X) -> np.ndarray:
        if self.n_features is None:
            raise NotFittedError(f"{self.kind} model is not fitted")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, self.n_features)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns, got shape {X.shape}")
        return X

    def decision_scores(self, X) -> np.ndarray:
        X = self._check_X(X)
        if X.shape[0] == 0:
            return np.zeros(0)
        return self._scores(X)

    def predict(self, X) -> np.ndarray:
        return (self.decision_scores(X) >= self.threshold).astype(np.int64)

    # subclasses implement these
    def _fit(self, X, y) -> None:
        raise NotImplementedError

    def _scores(self, X) -> np.ndarray:
        raise NotImplementedError

    def _arrays(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def _load_arrays(self, arrays) -> None:
        raise NotImplementedError


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def save_model(model: Model, path) -> None:
    """Write a model as ``.npz``: parameter arrays plus a JSON header carrying
    the format version, the full ModelSpec and training metadata."""
    header = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "n_features": model.n_features,
        "metadata": _jsonable(model.metadata),
    }
    arrays = model._arrays()
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_model(path) -> Model:
    from . import MODEL_CLASSES

    with np.load(Path(path), allow_pickle=False) as z:
        header = json.loads(str(z["__header__"]))
        if header.get("format") != FORMAT or header.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: not a {FORMAT} v{FORMAT_VERSION} file")
        arrays = {k: z[k] for k in z.files if k != "__header__"}
    spec = ModelSpec.from_dict(header["spec"])
    model = MODEL_CLASSES[spec.kind](spec)
    model.n_features = header["n_features"]
    model.metadata = header["metadata"]
    model._load_arrays(arrays)
    return model
