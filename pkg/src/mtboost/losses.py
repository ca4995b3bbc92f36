"""Loss functions, probability transforms, and pseudo-residuals.

Raw model outputs are kept as N x K score matrices throughout (K = 1 for
regression). Classification targets are class indices; one-hot encoding is
internal to the residual/loss computations.
"""

from __future__ import annotations

import enum

import numpy as np


class LossKind(enum.Enum):
    SQUARED_ERROR = "squared_error"
    CROSS_ENTROPY = "cross_entropy"


def as_score_matrix(scores) -> np.ndarray:
    """Coerce scores to a float64 N x K matrix (a 1-D input becomes N x 1)."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        scores = scores[:, None]
    if scores.ndim != 2:
        raise ValueError(f"scores must be 1-D or 2-D, got shape {scores.shape}")
    return scores


def sigmoid(theta):
    """Numerically stable logistic function, elementwise on arrays."""
    theta = np.asarray(theta, dtype=np.float64)
    out = np.empty_like(theta)
    pos = theta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-theta[pos]))
    e = np.exp(theta[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


def softmax(scores) -> np.ndarray:
    """Row-wise softmax with max-subtraction for stability.

    Accepts a length-K vector or an N x K matrix; the output matches the
    input's shape and each row sums to 1.
    """
    scores = np.asarray(scores, dtype=np.float64)
    shifted = scores - np.max(scores, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(
            f"class labels must lie in [0, {num_classes}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _check_shapes(loss: LossKind, targets: np.ndarray, scores: np.ndarray) -> None:
    if scores.shape[0] != targets.shape[0]:
        raise ValueError(
            f"targets ({targets.shape[0]}) and scores ({scores.shape[0]}) "
            "disagree on sample count"
        )
    if loss is LossKind.SQUARED_ERROR and scores.shape[1] != 1:
        raise ValueError(f"squared error needs K=1 scores, got K={scores.shape[1]}")
    if loss is LossKind.CROSS_ENTROPY and scores.shape[1] < 2:
        raise ValueError(f"cross-entropy needs K>=2 scores, got K={scores.shape[1]}")


def loss_value(loss: LossKind, targets, scores) -> float:
    """Mean per-sample loss of raw scores against targets.

    Squared error uses the 1/2 (y - F)^2 form so its negative gradient is
    exactly y - F; cross-entropy is -log softmax probability of the true
    class.
    """
    scores = as_score_matrix(scores)
    targets = np.asarray(targets)
    _check_shapes(loss, targets, scores)
    if loss is LossKind.SQUARED_ERROR:
        diff = targets.astype(np.float64) - scores[:, 0]
        return float(0.5 * np.mean(diff * diff))
    labels = targets.astype(np.int64)
    if labels.min() < 0 or labels.max() >= scores.shape[1]:
        raise ValueError("class labels out of range for score matrix")
    shifted = scores - np.max(scores, axis=1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=1))
    true_score = shifted[np.arange(len(labels)), labels]
    return float(np.mean(log_norm - true_score))


def pseudo_residual(loss: LossKind, targets, scores) -> np.ndarray:
    """Negative gradient of the summed loss w.r.t. each raw score entry.

    Regression: r = y - F. Classification: r = onehot(y) - softmax(F),
    so each residual row sums to zero.
    """
    scores = as_score_matrix(scores)
    targets = np.asarray(targets)
    _check_shapes(loss, targets, scores)
    if loss is LossKind.SQUARED_ERROR:
        return (targets.astype(np.float64) - scores[:, 0])[:, None]
    labels = targets.astype(np.int64)
    return one_hot(labels, scores.shape[1]) - softmax(scores)
