"""Metrics, splitting, grid-search cross-validation, and rank statistics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .data import MultiTaskDataset

METRIC_KINDS = ("accuracy", "macro_recall", "rmse", "mae")

# Studentized-range q constants at p = 0.05 divided by sqrt(2), indexed by
# the number of compared models.
_NEMENYI_Q05 = {
    2: 1.960, 3: 2.344, 4: 2.569, 5: 2.728, 6: 2.850,
    7: 2.948, 8: 3.031, 9: 3.102, 10: 3.164,
}


@dataclass
class MetricReport:
    """One metric aggregated over batches: per-task means plus the
    batch-mean-then-run-mean overall value."""

    kind: str
    per_task: dict
    overall_mean: float
    overall_std: float


@dataclass
class RankSummary:
    avg_rank: dict
    critical_distance: float
    num_scenarios: int
    num_models: int


def metric(kind: str, targets, predictions) -> float:
    """Evaluate one metric; classification metrics take class indices."""
    targets = np.asarray(targets)
    predictions = np.asarray(predictions)
    if targets.shape[0] == 0:
        raise ValueError("cannot score an empty sample set")
    if targets.shape[0] != predictions.shape[0]:
        raise ValueError("targets and predictions disagree on length")
    if kind == "accuracy":
        return float(np.mean(targets == predictions))
    if kind == "macro_recall":
        # classes absent from the targets are skipped, not scored zero
        recalls = [
            float(np.mean(predictions[targets == c] == c))
            for c in np.unique(targets)
        ]
        return float(np.mean(recalls))
    if kind == "rmse":
        diff = targets.astype(np.float64) - predictions.astype(np.float64)
        return float(np.sqrt(np.mean(diff * diff)))
    if kind == "mae":
        diff = targets.astype(np.float64) - predictions.astype(np.float64)
        return float(np.mean(np.abs(diff)))
    raise ValueError(f"unknown metric kind {kind!r}")


def split_train_test(dataset: MultiTaskDataset, ratio: float = 0.8,
                     rng: np.random.Generator = None):
    """Random per-task split keeping at least one sample on each side."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    if rng is None:
        rng = np.random.default_rng(0)
    if (dataset.task_counts() < 2).any():
        raise ValueError("every task needs >= 2 samples to split")
    train_idx = []
    test_idx = []
    for t in range(dataset.num_tasks):
        idx = rng.permutation(dataset.task_indices(t))
        n = idx.shape[0]
        n_train = min(max(int(round(n * ratio)), 1), n - 1)
        train_idx.append(idx[:n_train])
        test_idx.append(idx[n_train:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return dataset.subset(train_idx), dataset.subset(test_idx)


def assign_folds(dataset: MultiTaskDataset, folds: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Fold labels stratified by task (and by class within each task).

    Assignment is a shuffled round robin that runs continuously across a
    task's class groups, so every fold contains samples from every task.
    """
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if (dataset.task_counts() < folds).any():
        small = np.nonzero(dataset.task_counts() < folds)[0]
        raise ValueError(
            f"tasks {small.tolist()} have fewer than {folds} samples"
        )
    fold_of = np.empty(dataset.num_samples, dtype=np.int64)
    for t in range(dataset.num_tasks):
        idx = dataset.task_indices(t)
        if dataset.num_classes >= 2:
            groups = [idx[dataset.targets[idx] == c]
                      for c in np.unique(dataset.targets[idx])]
        else:
            groups = [idx]
        offset = 0
        for group in groups:
            group = rng.permutation(group)
            fold_of[group] = (offset + np.arange(group.shape[0])) % folds
            offset += group.shape[0]
    return fold_of


def grid_search_cv(fit_fn, candidates, train: MultiTaskDataset, folds: int = 5,
                   scorer=None, rng: np.random.Generator = None) -> dict:
    """Exhaustively score every candidate config by k-fold CV.

    ``fit_fn(config, train_subset, seed)`` returns a predictor and
    ``scorer(predictor, validation_subset)`` returns a score to maximize.
    The best mean-CV-score config wins; ties keep the earliest candidate.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("empty candidate grid")
    if scorer is None:
        raise ValueError("a scorer is required")
    if rng is None:
        rng = np.random.default_rng(0)
    fold_of = assign_folds(train, folds, rng)
    best_config = None
    best_score = -np.inf
    for config in candidates:
        fold_scores = []
        for f in range(folds):
            fit_set = train.subset(np.nonzero(fold_of != f)[0])
            val_set = train.subset(np.nonzero(fold_of == f)[0])
            model = fit_fn(config, fit_set, int(rng.integers(2**31)))
            fold_scores.append(scorer(model, val_set))
        mean_score = float(np.mean(fold_scores))
        if mean_score > best_score:
            best_score = mean_score
            best_config = config
    return best_config


def expand_grid(grid: dict) -> list:
    """Dict of lists -> list of configs in product order (first key slowest)."""
    keys = list(grid.keys())
    return [dict(zip(keys, combo))
            for combo in itertools.product(*(grid[k] for k in keys))]


def predict_dataset(predictor, mt: MultiTaskDataset) -> np.ndarray:
    """Raw scores for a whole dataset from any per-task predictor."""
    out = None
    for t in range(mt.num_tasks):
        idx = mt.task_indices(t)
        scores = predictor.predict(mt.features[idx], t)
        if out is None:
            out = np.empty((mt.num_samples, scores.shape[1]))
        out[idx] = scores
    return out


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    if denom == 0.0:
        return 0.0
    return float((a * b).sum() / denom)


def align_theta(sigma_vectors) -> list:
    """Flip gate vectors negatively correlated with the first one to 1 - v.

    The gate's two extremes are label-symmetric across runs; aligning to a
    reference removes that ambiguity before averaging.
    """
    vectors = [np.asarray(v, dtype=np.float64) for v in sigma_vectors]
    if not vectors:
        raise ValueError("need at least one vector")
    length = vectors[0].shape[0]
    if any(v.shape != (length,) for v in vectors):
        raise ValueError("all vectors must share one length")
    reference = vectors[0]
    aligned = [reference.copy()]
    for v in vectors[1:]:
        if _pearson(v, reference) < 0.0:
            aligned.append(1.0 - v)
        else:
            aligned.append(v.copy())
    return aligned


def _fractional_ranks(values: np.ndarray) -> np.ndarray:
    """Ascending fractional ranks starting at 1; ties share the average."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.shape[0])
    i = 0
    while i < values.shape[0]:
        j = i
        while j + 1 < values.shape[0] and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def rank_models(score_table, model_names=None, higher_is_better: bool = True) -> RankSummary:
    """Average fractional ranks per model plus the Nemenyi critical distance.

    ``score_table`` is scenarios x models; rank 1 is best in every
    scenario. CD = q_0.05(k) * sqrt(k (k + 1) / (6 N)).
    """
    table = np.asarray(score_table, dtype=np.float64)
    if table.ndim != 2 or table.size == 0:
        raise ValueError("score table must be a nonempty scenarios x models matrix")
    n_scenarios, n_models = table.shape
    if n_models < 2:
        raise ValueError("ranking needs at least two models")
    if n_models not in _NEMENYI_Q05:
        raise ValueError(f"no q constant tabulated for k={n_models}")
    if model_names is None:
        model_names = [f"model{j}" for j in range(n_models)]
    if len(model_names) != n_models:
        raise ValueError("model_names length does not match the table")
    ranks = np.empty_like(table)
    for i in range(n_scenarios):
        row = -table[i] if higher_is_better else table[i]
        ranks[i] = _fractional_ranks(row)
    avg = ranks.mean(axis=0)
    cd = _NEMENYI_Q05[n_models] * np.sqrt(
        n_models * (n_models + 1) / (6.0 * n_scenarios)
    )
    return RankSummary(
        avg_rank={name: float(r) for name, r in zip(model_names, avg)},
        critical_distance=float(cd),
        num_scenarios=n_scenarios,
        num_models=n_models,
    )
