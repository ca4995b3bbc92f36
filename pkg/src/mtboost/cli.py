"""Command-line front end: dataset generation, training, and benchmarks.

Commands write line-oriented key=value logs and deterministic artifacts;
given the same seed and flags, every output file is byte-identical across
reruns.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .data import load_csv, save_csv
from .experiment import (DEFAULT_GRIDS, MODEL_NAMES, ExperimentConfig,
                         fit_model, load_model, run_experiment, save_model)
from .losses import LossKind, loss_value
from .rmtgb import RmtgbConfig, fit_rmtgb
from .boosting import fit_baseline, BaselineKind
from .synth import PRESETS, SynthConfig, gen_multitask

_LOSS_FLAGS = {"squared": LossKind.SQUARED_ERROR,
               "cross-entropy": LossKind.CROSS_ENTROPY}
_BASELINES = {"st-gb": BaselineKind.SINGLE_TASK,
              "dp-gb": BaselineKind.DATA_POOLING,
              "taf-gb": BaselineKind.TASK_AS_FEATURE}


def _resolve_synth_config(args) -> SynthConfig:
    if args.config is not None:
        obj = json.loads(Path(args.config).read_text())
        cfg = SynthConfig.from_json(obj)
    else:
        cfg = PRESETS[args.preset]
    if args.seed is not None:
        obj = cfg.to_json()
        obj["seed"] = args.seed
        cfg = SynthConfig.from_json(obj)
    return cfg


def cmd_synth(args) -> int:
    cfg = _resolve_synth_config(args)
    batch = gen_multitask(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_csv(batch.train, out / "train.csv")
    save_csv(batch.test, out / "test.csv")
    manifest = {
        "seed": cfg.seed,
        "config": cfg.to_json(),
        "outlier_task_ids": sorted(batch.outlier_task_ids),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    print(f"wrote train.csv test.csv manifest.json to {out}")
    return 0


def _infer_classes(path) -> int:
    with Path(path).open("r", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        labels = [int(row[1]) for row in reader if row]
    return max(labels) + 1


def cmd_train(args) -> int:
    loss = _LOSS_FLAGS[args.loss]
    classes = 1
    if loss is LossKind.CROSS_ENTROPY:
        classes = args.classes if args.classes else _infer_classes(args.data)
    mt = load_csv(args.data, num_classes=classes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log_lines = []

    def logger(**kv):
        log_lines.append(" ".join(f"{k}={v}" for k, v in kv.items()))

    if args.model in ("rmtgb", "mtgb"):
        cfg = RmtgbConfig(
            m1=args.m1,
            m2=0 if args.model == "mtgb" else args.m2,
            m3=args.m3,
            shrinkage=args.shrinkage,
            theta_learning_rate=args.theta_lr,
            seed=args.seed,
        )
        model = fit_rmtgb(mt, loss, cfg, round_logger=logger)
    else:
        model = fit_baseline(_BASELINES[args.model], mt, loss, args.rounds,
                             args.shrinkage, round_logger=logger)
    save_model(model, args.model, out / "model.json")
    (out / "train.log").write_text("\n".join(log_lines) + "\n" if log_lines else "")
    print(f"wrote model.json and train.log to {out}")
    return 0


def cmd_benchmark(args) -> int:
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    grids = {}
    if args.grid is not None:
        grids = json.loads(Path(args.grid).read_text())
    if args.preset is not None:
        dataset, loss, classes = args.preset, None, None
    else:
        dataset = args.data
        loss = _LOSS_FLAGS[args.loss]
        classes = None
        if loss is LossKind.CROSS_ENTROPY:
            classes = args.classes if args.classes else _infer_classes(args.data)
    cfg = ExperimentConfig(
        dataset=dataset,
        models=models,
        num_batches=args.batches,
        seed=args.seed,
        out_dir=args.out,
        grids=grids,
        loss=loss,
        num_classes=classes,
        jobs=args.jobs,
    )
    result = run_experiment(cfg)
    for name in models:
        mean, std = result.summary[(name, result.primary_metric)]
        print(f"model={name} {result.primary_metric}={mean:.4f} std={std:.4f}")
    print(f"report written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtboost",
        description="Multi-task gradient boosting experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--config", help="SynthConfig JSON file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one model on a dataset CSV")
    p.add_argument("--model", required=True, choices=MODEL_NAMES)
    p.add_argument("--data", required=True, help="dataset CSV path")
    p.add_argument("--loss", choices=sorted(_LOSS_FLAGS), default="squared")
    p.add_argument("--classes", type=int, default=None,
                   help="class count for cross-entropy (default: infer)")
    p.add_argument("--m1", type=int, default=20)
    p.add_argument("--m2", type=int, default=20)
    p.add_argument("--m3", type=int, default=20)
    p.add_argument("--rounds", type=int, default=100,
                   help="boosting rounds for the baseline models")
    p.add_argument("--shrinkage", type=float, default=1.0)
    p.add_argument("--theta-lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("benchmark", help="run the batch evaluation protocol")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--data", help="dataset CSV path")
    p.add_argument("--loss", choices=sorted(_LOSS_FLAGS), default="squared")
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--models", default=",".join(MODEL_NAMES),
                   help="comma-separated subset of " + ",".join(MODEL_NAMES))
    p.add_argument("--batches", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", default=None,
                   help="JSON file overriding per-model grids")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
