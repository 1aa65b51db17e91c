"""Single-threaded inference time of every model on a 10,000-row test set.

Uses a wide (384-feature) overlapping problem so the kernel SVMs keep many
support vectors. Fitting the forest dominates the runtime (a few minutes).

    python3 demos/inference_timing.py
"""

from nidsbalance.classifiers import KINDS, MODEL_CLASSES, ModelSpec
from nidsbalance.data import SyntheticSpec, generate_synthetic
from nidsbalance.evaluation import time_inference

D, n_train = 384, 8000
train = generate_synthetic(SyntheticSpec(n_majority=n_train // 2, n_minority=n_train // 2,
                                         n_features=D, class_separation=0.02, seed=1))
test = generate_synthetic(SyntheticSpec(n_majority=5000, n_minority=5000, n_features=D,
                                        class_separation=0.02, seed=2))
for kind in KINDS:
    hp = {"cache_rows": n_train, "C": 0.01} if kind.startswith("svm") else {}
    model = MODEL_CLASSES[kind](ModelSpec(kind, hp)).fit(train.X, train.y)
    t = time_inference(model, test.X, runs=3)
    print(f"{kind:18s} {t.seconds:9.4f} s  (variance {t.variance:.2g})", flush=True)
