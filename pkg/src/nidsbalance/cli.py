"""Command-line entry point.

Subcommands::

    run       full experiment, reports written to [output] dir
    gen       write a synthetic dataset as CSV (--emit-csv)
    features  feature-selection reports only
    sample    write a resampled CSV

Every config key is also a flag, e.g. ``--sampling.modes none,smote`` or
``--model:gbt.n_rounds 50``. Flags override the ``--config`` file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .data import write_csv
from .experiment import (
    ExperimentConfig,
    emit_reports,
    format_summary,
    load_data,
    prepare,
    preprocess_options,
    run_experiment,
    sample_training,
    select_features,
)
from .features import write_report
from .preprocess import fit_transform

EXIT_OK, EXIT_CELL_FAILED, EXIT_ERROR = 0, 1, 2


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="INI", help="experiment config file")
    p.add_argument("--print-config", action="store_true",
                   help="print the effective config and exit")
    p.add_argument("--debug", action="store_true", help="enable the no-leakage row audit")
    p.add_argument("-v", "--verbose", action="store_true")
    g = p.add_argument_group("config overrides")
    for section, values in ExperimentConfig().sections.items():
        for key in values:
            g.add_argument(f"--{section}.{key}", dest=f"cfg::{section}::{key}", metavar="VALUE",
                           default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nidsbalance",
                                     description="Imbalance-aware intrusion-detection experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full experiment")
    _add_config_flags(run)

    gen = sub.add_parser("gen", help="generate a synthetic dataset")
    _add_config_flags(gen)
    gen.add_argument("--emit-csv", metavar="PATH", required=False, help="CSV destination")

    feats = sub.add_parser("features", help="write feature-selection reports only")
    _add_config_flags(feats)

    samp = sub.add_parser("sample", help="write a resampled (balanced) CSV")
    _add_config_flags(samp)
    samp.add_argument("--mode", default="smote", choices=("none", "smote", "ros", "rus"))
    samp.add_argument("--output", metavar="PATH", required=False, help="CSV destination")
    samp.add_argument("--provenance", metavar="PATH", help="SMOTE provenance sidecar")
    return parser


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    for dest, value in vars(args).items():
        if dest.startswith("cfg::") and value is not None:
            _, section, key = dest.split("::")
            cfg.set(section, key, value)
    if args.debug:
        cfg.set("run", "debug", True)
    cfg.validate()
    return cfg


def _cmd_run(cfg: ExperimentConfig) -> int:
    result = run_experiment(cfg)
    out = Path(cfg.get("output", "dir"))
    emit_reports(result, out, cfg)
    sys.stdout.write(format_summary(result.cells))
    failed = [c for c in result.cells if not c.ok]
    for c in failed:
        print(f"failed: {c.kind}/{c.scenario}: {c.error}", file=sys.stderr)
    return EXIT_OK if not failed else EXIT_CELL_FAILED


def _cmd_gen(cfg: ExperimentConfig, path) -> int:
    if not path:
        raise SystemExit("gen needs --emit-csv PATH")
    d = load_data(cfg)
    write_csv(d, path, label_column=cfg.get("data", "label_column"))
    counts = d.class_counts()
    print(f"wrote {d.n_rows} rows ({counts.get(0, 0)} normal, {counts.get(1, 0)} attack) to {path}")
    return EXIT_OK


def _cmd_features(cfg: ExperimentConfig) -> int:
    train, _, _, audit = prepare(cfg)
    audit.check("feature-select", train)
    reports, union = select_features(cfg, train)
    out = Path(cfg.get("output", "dir")) / "features"
    out.mkdir(parents=True, exist_ok=True)
    for r in reports:
        write_report(r, out / f"{r.scorer}.tsv")
        print(f"{r.scorer}: {len(r.selected)} selected (threshold {r.threshold:.6g})")
    (out / "selected.txt").write_text("".join(f + "\n" for f in union), encoding="utf-8")
    print(f"union: {len(union)} features: {', '.join(union)}")
    return EXIT_OK


def _cmd_sample(cfg: ExperimentConfig, mode, path, prov_path) -> int:
    """Preprocess the whole input and resample it; no split is made."""
    if not path:
        raise SystemExit("sample needs --output PATH")
    d = load_data(cfg)
    if cfg.get("preprocess", "enabled"):
        _, d = fit_transform(d, **preprocess_options(cfg, d.names))
    out, prov = sample_training(mode, d, cfg.smote_config())
    write_csv(out, path, label_column=cfg.get("data", "label_column"))
    if prov_path and prov is not None:
        prov.write(prov_path)
    counts = out.class_counts()
    print(f"wrote {out.n_rows} rows ({counts.get(0, 0)} normal, {counts.get(1, 0)} attack) to {path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.print_config:
            sys.stdout.write(cfg.to_ini())
            return EXIT_OK
        if args.command == "run":
            return _cmd_run(cfg)
        if args.command == "gen":
            return _cmd_gen(cfg, args.emit_csv)
        if args.command == "features":
            return _cmd_features(cfg)
        return _cmd_sample(cfg, args.mode, args.output, args.provenance)
    except (ValueError, OSError, KeyError) as exc:
        print(f"nidsbalance: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
