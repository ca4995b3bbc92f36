"""Three-block robust multi-task gradient boosting.

The fitted model combines four stump ensembles:

    F_t(x) = shared(x) + (1 - sigmoid(theta_t)) * non_outlier(x)
             + sigmoid(theta_t) * outlier(x) + per_task[t](x)

Training runs three sequential blocks: (1) shared rounds on the pooled
data, (2) paired outlier / non-outlier rounds whose residual targets are
gated per task by sigmoid(theta), followed by a gradient step on theta,
and (3) per-task fine-tuning rounds on each task's own samples. Setting
``m2 = 0`` recovers plain shared-plus-task-specific multi-task boosting;
a single task with ``m1 = m2 = 0`` recovers a single-task fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boosting import ComponentEnsemble, ensemble_from_dict, ensemble_to_dict
from .data import MultiTaskDataset
from .losses import LossKind, loss_value, pseudo_residual, sigmoid
from .stump import SplitContext, predict_stump


@dataclass
class RmtgbConfig:
    """Round budget and optimizer settings for one fit.

    ``theta_learning_rate`` defaults to the shrinkage factor; theta is
    initialized i.i.d. normal with the given mean/std from ``seed``.
    """

    m1: int
    m2: int
    m3: int
    shrinkage: float = 1.0
    theta_init_mean: float = 0.0
    theta_init_std: float = 1.0
    theta_learning_rate: float = None
    seed: int = 0

    def __post_init__(self):
        for name in ("m1", "m2", "m3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 < self.shrinkage <= 1.0:
            raise ValueError(f"shrinkage must lie in (0, 1], got {self.shrinkage}")
        if self.theta_init_std < 0:
            raise ValueError("theta_init_std must be >= 0")
        if self.theta_learning_rate is None:
            self.theta_learning_rate = self.shrinkage


@dataclass
class RmtgbModel:
    shared: ComponentEnsemble
    outlier: ComponentEnsemble
    non_outlier: ComponentEnsemble
    per_task: list
    theta: np.ndarray
    loss: LossKind
    rounds: tuple

    @property
    def num_tasks(self) -> int:
        return len(self.per_task)

    def gate(self, task_id: int = None):
        """sigmoid(theta), for one task or the full vector."""
        if task_id is None:
            return sigmoid(self.theta)
        return float(sigmoid(self.theta[task_id]))

    def predict(self, features, task_id: int) -> np.ndarray:
        return predict_rmtgb(self, features, task_id)

    def predict_dataset(self, mt: MultiTaskDataset) -> np.ndarray:
        """Raw scores for every sample of a dataset, routed by task id."""
        k = self.shared.num_outputs
        out = np.empty((mt.num_samples, k))
        for t in range(mt.num_tasks):
            idx = mt.task_indices(t)
            if idx.size:
                out[idx] = self.predict(mt.features[idx], t)
        return out


def shared_residuals(loss: LossKind, mt: MultiTaskDataset, current_scores) -> np.ndarray:
    """Pseudo-residuals of the total prediction (unit chain factor)."""
    return pseudo_residual(loss, mt.targets, current_scores)


def _gated_residual_pair(loss, mt, current_scores, theta):
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (mt.num_tasks,):
        raise ValueError(
            f"theta has length {theta.shape}, expected ({mt.num_tasks},)"
        )
    r = pseudo_residual(loss, mt.targets, current_scores)
    out = r * sigmoid(theta)[mt.task_of][:, None]
    # the complement side is computed as r minus the gated rows: one rounding
    # of r * (1 - sigmoid), and the pair partitions r exactly
    return r, out, r - out


def outlier_residuals(loss, mt, current_scores, theta) -> np.ndarray:
    """Pseudo-residual rows scaled by each sample's task gate sigmoid(theta_t)."""
    return _gated_residual_pair(loss, mt, current_scores, theta)[1]


def non_outlier_residuals(loss, mt, current_scores, theta) -> np.ndarray:
    """Complement of outlier_residuals: rows scaled by 1 - sigmoid(theta_t)."""
    return _gated_residual_pair(loss, mt, current_scores, theta)[2]


def task_residuals(loss: LossKind, task_slice: MultiTaskDataset, current_scores) -> np.ndarray:
    """Pseudo-residuals on one task's slice at the current total prediction."""
    if np.unique(task_slice.task_of).size != 1:
        raise ValueError("task_residuals expects a slice of exactly one task")
    return pseudo_residual(loss, task_slice.targets, current_scores)


def theta_gradient(
    loss: LossKind,
    mt: MultiTaskDataset,
    current_scores,
    outlier_scores,
    non_outlier_scores,
    theta,
) -> np.ndarray:
    """Exact d(total loss)/d(theta_t) for each task.

    ``outlier_scores`` and ``non_outlier_scores`` are the raw (ungated)
    component outputs. For task t the derivative is

        sum_{i in t} sum_k -r_ik * s_t * (1 - s_t) * (out_ik - non_ik)

    with r the pseudo-residual at the current total scores and
    s_t = sigmoid(theta_t).
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (mt.num_tasks,):
        raise ValueError(
            f"theta has length {theta.shape}, expected ({mt.num_tasks},)"
        )
    outlier_scores = np.asarray(outlier_scores, dtype=np.float64)
    non_outlier_scores = np.asarray(non_outlier_scores, dtype=np.float64)
    if outlier_scores.shape != non_outlier_scores.shape:
        raise ValueError("component score matrices disagree on shape")
    r = pseudo_residual(loss, mt.targets, current_scores)
    if r.shape != outlier_scores.shape:
        raise ValueError("component scores do not match the dataset shape")
    per_sample = -np.sum(r * (outlier_scores - non_outlier_scores), axis=1)
    sums = np.bincount(mt.task_of, weights=per_sample, minlength=mt.num_tasks)
    s = sigmoid(theta)
    return sums * s * (1.0 - s)


def fit_rmtgb(
    mt: MultiTaskDataset,
    loss: LossKind,
    config: RmtgbConfig,
    round_logger=None,
) -> RmtgbModel:
    """Run the three training blocks and return the fitted gated model.

    Block 2 computes both gated residual sets from the round-start scores,
    fits the outlier stump then the non-outlier stump, and finally takes
    one full-batch descent step on theta using scores refreshed after both
    additions.
    """
    if loss is LossKind.CROSS_ENTROPY and mt.num_classes < 2:
        raise ValueError("cross-entropy requires a dataset with num_classes >= 2")
    if config.m3 > 0 and (mt.task_counts() < 2).any():
        small = np.nonzero(mt.task_counts() < 2)[0]
        raise ValueError(
            f"per-task fine-tuning needs >= 2 samples per task; "
            f"tasks {small.tolist()} are smaller"
        )
    eta = config.shrinkage
    k = 1 if loss is LossKind.SQUARED_ERROR else mt.num_classes
    n, t_count = mt.num_samples, mt.num_tasks
    rng = np.random.default_rng(config.seed)
    theta = rng.normal(config.theta_init_mean, config.theta_init_std, t_count)

    shared = ComponentEnsemble(shrinkage=eta, num_outputs=k)
    outlier = ComponentEnsemble(shrinkage=eta, num_outputs=k)
    non_outlier = ComponentEnsemble(shrinkage=eta, num_outputs=k)
    per_task = [ComponentEnsemble(shrinkage=eta, num_outputs=k) for _ in range(t_count)]

    shared_scores = np.zeros((n, k))
    outlier_raw = np.zeros((n, k))
    non_outlier_raw = np.zeros((n, k))
    task_scores = np.zeros((n, k))
    features = mt.features
    task_of = mt.task_of

    def total_scores():
        s = sigmoid(theta)[task_of][:, None]
        return shared_scores + (1.0 - s) * non_outlier_raw + s * outlier_raw + task_scores

    ctx_pool = SplitContext(features)

    for m in range(config.m1):
        residuals = pseudo_residual(loss, mt.targets, total_scores())
        stump = ctx_pool.fit(residuals)
        shared.stumps.append(stump)
        shared_scores += eta * predict_stump(stump, features)
        if round_logger is not None:
            round_logger(block=1, round=m + 1,
                         loss=loss_value(loss, mt.targets, total_scores()))

    lr = config.theta_learning_rate
    for m in range(config.m2):
        residuals = pseudo_residual(loss, mt.targets, total_scores())
        gated = residuals * sigmoid(theta)[task_of][:, None]
        stump_out = ctx_pool.fit(gated)
        outlier.stumps.append(stump_out)
        outlier_raw += eta * predict_stump(stump_out, features)
        stump_non = ctx_pool.fit(residuals - gated)
        non_outlier.stumps.append(stump_non)
        non_outlier_raw += eta * predict_stump(stump_non, features)
        grad = theta_gradient(
            loss, mt, total_scores(), outlier_raw, non_outlier_raw, theta
        )
        theta = theta - lr * grad
        if round_logger is not None:
            round_logger(block=2, round=m + 1,
                         loss=loss_value(loss, mt.targets, total_scores()))

    if config.m3 > 0:
        # components are kept separate so training residuals see exactly the
        # composition predict() produces
        full_total = total_scores()
        for t in range(t_count):
            idx = mt.task_indices(t)
            x_t = features[idx]
            y_t = mt.targets[idx]
            ctx_t = SplitContext(x_t)
            base_t = full_total[idx]
            task_acc = np.zeros((idx.shape[0], k))
            for m in range(config.m3):
                residuals = pseudo_residual(loss, y_t, base_t + task_acc)
                stump = ctx_t.fit(residuals)
                per_task[t].stumps.append(stump)
                task_acc += eta * predict_stump(stump, x_t)
                if round_logger is not None:
                    round_logger(block=3, task=t, round=m + 1,
                                 loss=loss_value(loss, y_t, base_t + task_acc))

    return RmtgbModel(
        shared=shared,
        outlier=outlier,
        non_outlier=non_outlier,
        per_task=per_task,
        theta=theta,
        loss=loss,
        rounds=(config.m1, config.m2, config.m3),
    )


def predict_rmtgb(model: RmtgbModel, features, task_id: int) -> np.ndarray:
    """Evaluate the four-component gated combination for one task."""
    if not 0 <= task_id < model.num_tasks:
        raise ValueError(f"unknown task id {task_id}")
    s = model.gate(task_id)
    return (
        model.shared.predict(features)
        + (1.0 - s) * model.non_outlier.predict(features)
        + s * model.outlier.predict(features)
        + model.per_task[task_id].predict(features)
    )


def rmtgb_to_dict(model: RmtgbModel) -> dict:
    return {
        "loss": model.loss.value,
        "rounds": list(model.rounds),
        "shrinkage": float(model.shared.shrinkage),
        "theta": [float(v) for v in model.theta],
        "shared": ensemble_to_dict(model.shared),
        "outlier": ensemble_to_dict(model.outlier),
        "non_outlier": ensemble_to_dict(model.non_outlier),
        "per_task": [ensemble_to_dict(e) for e in model.per_task],
    }


def rmtgb_from_dict(obj: dict) -> RmtgbModel:
    return RmtgbModel(
        shared=ensemble_from_dict(obj["shared"]),
        outlier=ensemble_from_dict(obj["outlier"]),
        non_outlier=ensemble_from_dict(obj["non_outlier"]),
        per_task=[ensemble_from_dict(e) for e in obj["per_task"]],
        theta=np.asarray(obj["theta"], dtype=np.float64),
        loss=LossKind(obj["loss"]),
        rounds=tuple(obj["rounds"]),
    )
