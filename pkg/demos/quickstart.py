"""Small end-to-end run: imbalanced vs SMOTE-balanced training on synthetic flows.

    python3 demos/quickstart.py [output-dir]
"""

import sys

from nidsbalance.experiment import ExperimentConfig, emit_reports, format_summary, run_experiment

out = sys.argv[1] if len(sys.argv) > 1 else "results/quickstart"
cfg = ExperimentConfig()
cfg.set("synthetic", "n_majority", 20000)
cfg.set("synthetic", "n_minority", 40)
cfg.set("sampling", "modes", "none,smote,ros,rus")
cfg.set("run", "debug", True)

result = run_experiment(cfg)
emit_reports(result, out, cfg)
print(format_summary(result.cells), end="")
print("class counts per scenario:", result.class_counts)
print("reports written to", out)
