"""Stage-wise gradient boosting over stumps, plus the pooled baselines.

Every weak learner is added with a fixed unit step (no per-round line
search) scaled by the shrinkage factor, so an ensemble prediction is
``base_score + shrinkage * sum(stump outputs)``.

Baselines: single-task (one ensemble per task), data pooling (one ensemble,
task ids discarded) and task-as-feature (pooling with a one-hot task block
appended to the features).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .data import MultiTaskDataset
from .losses import LossKind, loss_value, pseudo_residual
from .stump import SplitContext, Stump, predict_stump


class BaselineKind(enum.Enum):
    SINGLE_TASK = "single_task"
    DATA_POOLING = "data_pooling"
    TASK_AS_FEATURE = "task_as_feature"


@dataclass
class ComponentEnsemble:
    """An ordered list of stumps applied with a common shrinkage factor."""

    stumps: list = field(default_factory=list)
    shrinkage: float = 1.0
    base_score: np.ndarray = None
    num_outputs: int = 1

    def __post_init__(self):
        if not 0.0 < self.shrinkage <= 1.0:
            raise ValueError(f"shrinkage must lie in (0, 1], got {self.shrinkage}")
        if self.base_score is None:
            self.base_score = np.zeros(self.num_outputs)
        self.base_score = np.asarray(self.base_score, dtype=np.float64)

    def predict(self, features) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        out = np.tile(self.base_score, (features.shape[0], 1))
        for stump in self.stumps:
            out += self.shrinkage * predict_stump(stump, features)
        return out


def predict_gb(ensemble: ComponentEnsemble, features) -> np.ndarray:
    """Raw ensemble scores; classification callers apply softmax on top."""
    return ensemble.predict(features)


def _initial_score(loss, targets, init_mode, num_classes):
    if init_mode == "zero":
        k = 1 if loss is LossKind.SQUARED_ERROR else num_classes
        return np.zeros(k)
    if init_mode != "constant":
        raise ValueError(f"unknown init_mode {init_mode!r}")
    if loss is LossKind.SQUARED_ERROR:
        return np.array([float(np.mean(targets))])
    prior = np.bincount(targets.astype(np.int64), minlength=num_classes) / len(targets)
    return np.log(np.maximum(prior, 1e-12))


def fit_gb(
    features,
    targets,
    loss: LossKind,
    num_rounds: int,
    shrinkage: float = 1.0,
    init_mode: str = "zero",
    num_classes: int = 1,
    round_logger=None,
) -> ComponentEnsemble:
    """Fit one boosted-stump ensemble by stage-wise residual fitting.

    Each round fits a least-squares stump to the pseudo-residuals of the
    current scores and adds it with the shrinkage step. ``init_mode`` is
    ``"zero"`` (base score 0) or ``"constant"`` (mean target for squared
    error, log class priors for cross-entropy).
    """
    features = np.ascontiguousarray(features, dtype=np.float64)
    targets = np.asarray(targets)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ValueError("features must be a nonempty N x d matrix")
    if targets.shape[0] != features.shape[0]:
        raise ValueError("targets and features disagree on sample count")
    if num_rounds < 0:
        raise ValueError(f"num_rounds must be >= 0, got {num_rounds}")
    if loss is LossKind.CROSS_ENTROPY and num_classes < 2:
        raise ValueError("cross-entropy requires num_classes >= 2")

    base = _initial_score(loss, targets, init_mode, num_classes)
    ensemble = ComponentEnsemble(
        stumps=[], shrinkage=shrinkage, base_score=base, num_outputs=len(base)
    )
    scores = np.tile(base, (features.shape[0], 1))
    ctx = SplitContext(features)
    for m in range(num_rounds):
        residuals = pseudo_residual(loss, targets, scores)
        stump = ctx.fit(residuals)
        ensemble.stumps.append(stump)
        scores += shrinkage * predict_stump(stump, features)
        if round_logger is not None:
            round_logger(round=m + 1, loss=loss_value(loss, targets, scores))
    return ensemble


def pool(mt: MultiTaskDataset):
    """All samples concatenated in input order with task ids discarded."""
    return mt.features, mt.targets


def augment_task_onehot(mt: MultiTaskDataset):
    """Features with T task-indicator columns appended (exactly one 1 per row)."""
    indicators = np.zeros((mt.num_samples, mt.num_tasks))
    indicators[np.arange(mt.num_samples), mt.task_of] = 1.0
    return np.hstack([mt.features, indicators]), mt.targets


def _onehot_block(task_id: int, num_tasks: int, n: int) -> np.ndarray:
    block = np.zeros((n, num_tasks))
    block[:, task_id] = 1.0
    return block


@dataclass
class BaselineModel:
    """A fitted baseline exposing per-task prediction.

    ``ensembles`` holds one entry per task for the single-task kind and a
    single shared entry otherwise.
    """

    kind: BaselineKind
    loss: LossKind
    num_tasks: int
    num_classes: int
    ensembles: list

    def predict(self, features, task_id: int) -> np.ndarray:
        if not 0 <= task_id < self.num_tasks:
            raise ValueError(f"unknown task id {task_id}")
        features = np.asarray(features, dtype=np.float64)
        if self.kind is BaselineKind.SINGLE_TASK:
            return self.ensembles[task_id].predict(features)
        if self.kind is BaselineKind.TASK_AS_FEATURE:
            block = _onehot_block(task_id, self.num_tasks, features.shape[0])
            return self.ensembles[0].predict(np.hstack([features, block]))
        return self.ensembles[0].predict(features)


def fit_baseline(
    kind: BaselineKind,
    mt: MultiTaskDataset,
    loss: LossKind,
    num_rounds: int,
    shrinkage: float = 1.0,
    round_logger=None,
) -> BaselineModel:
    """Fit one of the three pooled/per-task baselines with zero-initialized scores."""
    if kind is BaselineKind.SINGLE_TASK:
        counts = mt.task_counts()
        if (counts < 2).any():
            small = np.nonzero(counts < 2)[0]
            raise ValueError(
                f"single-task fitting needs >= 2 samples per task; "
                f"tasks {small.tolist()} are smaller"
            )
        ensembles = []
        for t in range(mt.num_tasks):
            idx = mt.task_indices(t)
            logger = None
            if round_logger is not None:
                logger = lambda _t=t, **kv: round_logger(task=_t, **kv)
            ensembles.append(
                fit_gb(
                    mt.features[idx],
                    mt.targets[idx],
                    loss,
                    num_rounds,
                    shrinkage,
                    num_classes=mt.num_classes,
                    round_logger=logger,
                )
            )
    elif kind is BaselineKind.DATA_POOLING:
        features, targets = pool(mt)
        ensembles = [
            fit_gb(features, targets, loss, num_rounds, shrinkage,
                   num_classes=mt.num_classes, round_logger=round_logger)
        ]
    elif kind is BaselineKind.TASK_AS_FEATURE:
        features, targets = augment_task_onehot(mt)
        ensembles = [
            fit_gb(features, targets, loss, num_rounds, shrinkage,
                   num_classes=mt.num_classes, round_logger=round_logger)
        ]
    else:
        raise ValueError(f"unknown baseline kind {kind!r}")
    return BaselineModel(
        kind=kind,
        loss=loss,
        num_tasks=mt.num_tasks,
        num_classes=mt.num_classes,
        ensembles=ensembles,
    )


def ensemble_to_dict(ensemble: ComponentEnsemble, loss: LossKind = None) -> dict:
    out = {}
    if loss is not None:
        out["loss"] = loss.value
    out["shrinkage"] = float(ensemble.shrinkage)
    out["base_score"] = [float(v) for v in ensemble.base_score]
    out["stumps"] = [s.to_dict() for s in ensemble.stumps]
    return out


def ensemble_from_dict(obj: dict) -> ComponentEnsemble:
    base = np.asarray(obj["base_score"], dtype=np.float64)
    return ComponentEnsemble(
        stumps=[Stump.from_dict(s) for s in obj["stumps"]],
        shrinkage=float(obj["shrinkage"]),
        base_score=base,
        num_outputs=len(base),
    )


def baseline_to_dict(model: BaselineModel) -> dict:
    return {
        "kind": model.kind.value,
        "loss": model.loss.value,
        "num_tasks": model.num_tasks,
        "num_classes": model.num_classes,
        "ensembles": [ensemble_to_dict(e) for e in model.ensembles],
    }


def baseline_from_dict(obj: dict) -> BaselineModel:
    return BaselineModel(
        kind=BaselineKind(obj["kind"]),
        loss=LossKind(obj["loss"]),
        num_tasks=int(obj["num_tasks"]),
        num_classes=int(obj["num_classes"]),
        ensembles=[ensemble_from_dict(e) for e in obj["ensembles"]],
    )
