"""Batch experiment engine: generate/split, grid-search, refit, evaluate.

Every batch draws its randomness from a seed stream keyed by
``(root_seed, batch_index, ...)``, so reruns are byte-identical and adding
batches never perturbs earlier ones. Batches are independent and may run
in worker processes.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boosting import (BaselineKind, baseline_from_dict, baseline_to_dict,
                       fit_baseline)
from .data import MultiTaskDataset, load_csv
from .evaluation import (align_theta, expand_grid, grid_search_cv, metric,
                         predict_dataset, rank_models, split_train_test)
from .losses import LossKind
from .rmtgb import RmtgbConfig, fit_rmtgb, rmtgb_from_dict, rmtgb_to_dict
from .synth import PRESETS, gen_multitask

MODEL_NAMES = ("rmtgb", "mtgb", "st-gb", "dp-gb", "taf-gb")

DEFAULT_GRIDS = {
    "rmtgb": {"m1": [0, 20, 30, 50], "m2": [20, 30, 50], "m3": [0, 20, 30, 50, 100]},
    "mtgb": {"m1": [20, 30, 50], "m3": [0, 20, 30, 50, 100]},
    "st-gb": {"rounds": [20, 30, 50, 100]},
    "dp-gb": {"rounds": [20, 30, 50, 100]},
    "taf-gb": {"rounds": [20, 30, 50, 100]},
}

_BASELINE_OF = {
    "st-gb": BaselineKind.SINGLE_TASK,
    "dp-gb": BaselineKind.DATA_POOLING,
    "taf-gb": BaselineKind.TASK_AS_FEATURE,
}


@dataclass
class ExperimentConfig:
    """Everything one benchmark run depends on."""

    dataset: str  # synthetic preset name or CSV path
    models: list
    num_batches: int = 1
    seed: int = 0
    out_dir: str = None
    grids: dict = field(default_factory=dict)  # per-model dict-of-lists overrides
    loss: LossKind = None  # derived from the preset when None
    num_classes: int = None  # CSV classification only; None infers
    folds: int = 5
    shrinkage: float = 1.0
    split_ratio: float = 0.8
    jobs: int = 1

    def __post_init__(self):
        if self.num_batches < 1:
            raise ValueError("need at least one batch")
        if not self.models:
            raise ValueError("need at least one model")
        unknown = [m for m in self.models if m not in MODEL_NAMES]
        if unknown:
            raise ValueError(f"unknown models {unknown}; choose from {MODEL_NAMES}")
        if self.dataset in PRESETS:
            preset_loss = (LossKind.SQUARED_ERROR
                           if PRESETS[self.dataset].task_kind == "regression"
                           else LossKind.CROSS_ENTROPY)
            if self.loss is None:
                self.loss = preset_loss
            elif self.loss is not preset_loss:
                raise ValueError(f"preset {self.dataset} implies {preset_loss}")
        elif self.loss is None:
            raise ValueError("a loss kind is required for CSV datasets")
        full = dict(DEFAULT_GRIDS)
        full.update(self.grids or {})
        self.grids = full

    def candidate_lists(self) -> dict:
        return {name: expand_grid(self.grids[name]) for name in self.models}


def fit_model(name: str, config: dict, mt: MultiTaskDataset, loss: LossKind,
              seed: int, shrinkage: float = 1.0):
    """Fit one registry model from its grid config dict."""
    if name == "rmtgb":
        rc = RmtgbConfig(m1=config["m1"], m2=config["m2"], m3=config["m3"],
                         shrinkage=shrinkage, seed=seed)
        return fit_rmtgb(mt, loss, rc)
    if name == "mtgb":
        rc = RmtgbConfig(m1=config["m1"], m2=0, m3=config["m3"],
                         shrinkage=shrinkage, seed=seed)
        return fit_rmtgb(mt, loss, rc)
    if name in _BASELINE_OF:
        return fit_baseline(_BASELINE_OF[name], mt, loss, config["rounds"], shrinkage)
    raise ValueError(f"unknown model {name!r}")


def make_scorer(loss: LossKind):
    """Grid-search CV score: negative RMSE for regression, accuracy otherwise."""
    if loss is LossKind.SQUARED_ERROR:
        def scorer(model, val):
            raw = predict_dataset(model, val)
            return -metric("rmse", val.targets, raw[:, 0])
    else:
        def scorer(model, val):
            raw = predict_dataset(model, val)
            return metric("accuracy", val.targets, np.argmax(raw, axis=1))
    return scorer


def _metric_kinds(loss: LossKind):
    if loss is LossKind.SQUARED_ERROR:
        return ("rmse", "mae")
    return ("accuracy", "macro_recall")


def evaluate_model(model, mt: MultiTaskDataset, loss: LossKind):
    """Per-task and pooled (all instances and tasks) values of every metric."""
    raw = predict_dataset(model, mt)
    if loss is LossKind.SQUARED_ERROR:
        preds = raw[:, 0]
    else:
        preds = np.argmax(raw, axis=1)
    per_task = {}
    pooled = {}
    for kind in _metric_kinds(loss):
        pooled[kind] = metric(kind, mt.targets, preds)
        for t in range(mt.num_tasks):
            idx = mt.task_indices(t)
            per_task[(kind, t)] = metric(kind, mt.targets[idx], preds[idx])
    return per_task, pooled


def _stream(root_seed: int, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=root_seed,
                                                        spawn_key=tuple(key)))


def _batch_dataset(cfg: ExperimentConfig, batch_index: int):
    rng = _stream(cfg.seed, batch_index, 0)
    if cfg.dataset in PRESETS:
        batch = gen_multitask(PRESETS[cfg.dataset], rng)
        return batch.train, batch.test, sorted(batch.outlier_task_ids)
    classes = cfg.num_classes
    if cfg.loss is LossKind.CROSS_ENTROPY and classes is None:
        raise ValueError("num_classes is required for CSV classification data")
    mt = load_csv(cfg.dataset, num_classes=classes or 1)
    train, test = split_train_test(mt, cfg.split_ratio, rng)
    return train, test, None


def run_batch(cfg: ExperimentConfig, batch_index: int) -> dict:
    """Grid-search, refit and evaluate every model on one batch."""
    try:
        train, test, outliers = _batch_dataset(cfg, batch_index)
        scorer = make_scorer(cfg.loss)
        candidates = cfg.candidate_lists()
        out = {"batch": batch_index, "outlier_task_ids": outliers,
               "num_tasks": train.num_tasks, "models": {}}
        for j, name in enumerate(cfg.models):
            rng_model = _stream(cfg.seed, batch_index, 1, j)

            def fit_fn(config, mt, seed, _name=name):
                return fit_model(_name, config, mt, cfg.loss, seed, cfg.shrinkage)

            best = grid_search_cv(fit_fn, candidates[name], train,
                                  folds=cfg.folds, scorer=scorer, rng=rng_model)
            refit_seed = int(rng_model.integers(2**31))
            model = fit_model(name, best, train, cfg.loss, refit_seed, cfg.shrinkage)
            record = {"config": best, "metrics": {}}
            for split, mt in (("train", train), ("test", test)):
                per_task, pooled = evaluate_model(model, mt, cfg.loss)
                for (kind, t), v in per_task.items():
                    record["metrics"][(f"{split}_{kind}", t)] = v
                for kind, v in pooled.items():
                    record["metrics"][(f"{split}_{kind}", None)] = v
            if name == "rmtgb":
                record["sigma_theta"] = [float(v) for v in model.gate()]
            out["models"][name] = record
        return out
    except Exception as exc:
        raise RuntimeError(f"batch {batch_index} failed: {exc}") from exc


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    batches: list
    summary: dict  # (model, metric) -> (mean, std) over batch-level values
    rank: object  # RankSummary or None
    aligned_sigma: list  # per batch arrays, or None
    primary_metric: str

    def metric_report(self, model: str, metric_name: str) -> MetricReport:
        """Cross-batch aggregate of one metric: per-task means plus the
        batch-means-first overall mean and std."""
        num_tasks = self.batches[0]["num_tasks"]
        per_task = {
            t: float(np.mean([
                b["models"][model]["metrics"][(metric_name, t)]
                for b in self.batches
            ]))
            for t in range(num_tasks)
        }
        mean, std = self.summary[(model, metric_name)]
        return MetricReport(kind=metric_name, per_task=per_task,
                            overall_mean=mean, overall_std=std)


def _summarize(cfg: ExperimentConfig, batches: list) -> ExperimentResult:
    kinds = [f"{split}_{kind}" for split in ("train", "test")
             for kind in _metric_kinds(cfg.loss)]
    summary = {}
    for name in cfg.models:
        for m in kinds:
            vals = np.array([b["models"][name]["metrics"][(m, None)] for b in batches])
            std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
            summary[(name, m)] = (float(vals.mean()), std)
    primary = "test_rmse" if cfg.loss is LossKind.SQUARED_ERROR else "test_accuracy"
    rank = None
    if len(cfg.models) >= 2:
        table = np.array([[b["models"][name]["metrics"][(primary, None)]
                           for name in cfg.models] for b in batches])
        rank = rank_models(table, model_names=list(cfg.models),
                           higher_is_better=primary == "test_accuracy")
    aligned = None
    if "rmtgb" in cfg.models:
        aligned = align_theta([b["models"]["rmtgb"]["sigma_theta"] for b in batches])
    return ExperimentResult(cfg, batches, summary, rank, aligned, primary)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every batch (optionally in worker processes) and assemble reports."""
    indices = list(range(cfg.num_batches))
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            batches = list(pool.map(run_batch, [cfg] * len(indices), indices))
    else:
        batches = [run_batch(cfg, b) for b in indices]
    result = _summarize(cfg, batches)
    if cfg.out_dir is not None:
        write_report(result, Path(cfg.out_dir))
    return result


def _writer(path: Path):
    fh = path.open("w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_report(result: ExperimentResult, out_dir: Path) -> None:
    """Emit metrics/summary/rank/theta CSVs plus a manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    kinds = [f"{split}_{kind}" for split in ("train", "test")
             for kind in _metric_kinds(cfg.loss)]

    fh, w = _writer(out_dir / "metrics.csv")
    with fh:
        w.writerow(["batch", "model", "task", "metric", "value"])
        for b in result.batches:
            for name in cfg.models:
                rec = b["models"][name]
                for m in kinds:
                    for t in range(b["num_tasks"]):
                        w.writerow([b["batch"], name, t, m,
                                    repr(rec["metrics"][(m, t)])])

    fh, w = _writer(out_dir / "summary.csv")
    with fh:
        header = ["model"]
        for m in kinds:
            header += [f"{m}_mean", f"{m}_std"]
        w.writerow(header)
        for name in cfg.models:
            row = [name]
            for m in kinds:
                mean, std = result.summary[(name, m)]
                row += [repr(mean), repr(std)]
            w.writerow(row)

    if result.rank is not None:
        fh, w = _writer(out_dir / "ranks.csv")
        with fh:
            w.writerow(["model", "avg_rank", "critical_distance"])
            for name in cfg.models:
                w.writerow([name, repr(result.rank.avg_rank[name]),
                            repr(result.rank.critical_distance)])

    if result.aligned_sigma is not None:
        fh, w = _writer(out_dir / "theta.csv")
        with fh:
            w.writerow(["batch", "task", "sigma_theta"])
            for b, vec in zip(result.batches, result.aligned_sigma):
                for t, v in enumerate(vec):
                    w.writerow([b["batch"], t, repr(float(v))])

    fh, w = _writer(out_dir / "selected.csv")
    with fh:
        w.writerow(["batch", "model", "config"])
        for b in result.batches:
            for name in cfg.models:
                w.writerow([b["batch"], name,
                            json.dumps(b["models"][name]["config"], sort_keys=True)])

    manifest = {
        "dataset": cfg.dataset,
        "loss": cfg.loss.value,
        "models": list(cfg.models),
        "num_batches": cfg.num_batches,
        "seed": cfg.seed,
        "folds": cfg.folds,
        "shrinkage": cfg.shrinkage,
        "split_ratio": cfg.split_ratio,
        "grids": cfg.grids,
        "primary_metric": result.primary_metric,
        "outlier_task_ids": result.batches[0]["outlier_task_ids"],
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def save_model(model, name: str, path) -> None:
    if name in ("rmtgb", "mtgb"):
        obj = rmtgb_to_dict(model)
    else:
        obj = baseline_to_dict(model)
    obj["model"] = name
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_model(path):
    obj = json.loads(Path(path).read_text())
    name = obj.pop("model")
    if name in ("rmtgb", "mtgb"):
        return name, rmtgb_from_dict(obj)
    return name, baseline_from_dict(obj)
