"""Single-split regression trees with constant (possibly multi-output) leaves.

The exhaustive split search runs through a numba-compiled kernel when
available; setting the environment variable ``MTBOOST_DISABLE_NUMBA=1``
forces the pure-numpy fallback. Both kernels return identical stumps.

Split convention: ``x[feature] <= threshold`` goes left. Ties in total
squared error break toward the lowest feature index, then the lowest
threshold, making fits deterministic and platform independent.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

_env = os.environ.get("MTBOOST_DISABLE_NUMBA", "").strip().lower()
if _env in ("1", "true", "yes"):
    from ._split_numpy import best_split as _best_split

    ACTIVE_KERNEL = "numpy"
else:
    try:
        from ._split_numba import best_split as _best_split

        ACTIVE_KERNEL = "numba"
    except ImportError:
        from ._split_numpy import best_split as _best_split

        ACTIVE_KERNEL = "numpy"


@dataclass
class Stump:
    """One feature-threshold split with constant per-output leaf vectors."""

    feature_index: int
    threshold: float
    left_value: np.ndarray
    right_value: np.ndarray

    def to_dict(self) -> dict:
        return {
            "feature": int(self.feature_index),
            "threshold": float(self.threshold),
            "left": [float(v) for v in self.left_value],
            "right": [float(v) for v in self.right_value],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Stump":
        return cls(
            feature_index=int(obj["feature"]),
            threshold=float(obj["threshold"]),
            left_value=np.asarray(obj["left"], dtype=np.float64),
            right_value=np.asarray(obj["right"], dtype=np.float64),
        )


class SplitContext:
    """Per-feature stable sort order and distinct-value boundaries.

    Boosting refits stumps against fresh residuals on a fixed feature
    matrix, so the sort work is hoisted out of the per-round kernel call.
    """

    def __init__(self, features: np.ndarray):
        features = np.ascontiguousarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 1:
            raise ValueError("features must be a nonempty N x d matrix")
        self.features = features
        self.sort_idx = np.ascontiguousarray(
            np.argsort(features, axis=0, kind="stable").astype(np.int64)
        )
        sorted_vals = np.take_along_axis(features, self.sort_idx, axis=0)
        self.boundary = np.ascontiguousarray(sorted_vals[:-1] < sorted_vals[1:])

    def fit(self, residuals: np.ndarray) -> Stump:
        residuals = np.ascontiguousarray(residuals, dtype=np.float64)
        if residuals.ndim == 1:
            residuals = residuals[:, None]
        if residuals.shape[0] != self.features.shape[0]:
            raise ValueError(
                f"residual count {residuals.shape[0]} does not match "
                f"feature count {self.features.shape[0]}"
            )
        f, pos, _ = _best_split(self.features, residuals, self.sort_idx, self.boundary)
        if f < 0:
            mean = residuals.mean(axis=0)
            return Stump(0, math.inf, mean, mean.copy())
        col = self.features[:, f]
        lo = col[self.sort_idx[pos, f]]
        hi = col[self.sort_idx[pos + 1, f]]
        threshold = 0.5 * (lo + hi)
        if not lo < threshold < hi:
            # adjacent floats can round the midpoint onto an endpoint; pin
            # the threshold to the left value so <= reproduces the scanned
            # partition exactly
            threshold = lo
        mask = col <= threshold
        left = residuals[mask].mean(axis=0)
        right = residuals[~mask].mean(axis=0)
        return Stump(int(f), float(threshold), left, right)


def fit_stump(features, residuals) -> Stump:
    """Exhaustive-search least-squares stump over all (feature, midpoint) pairs.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values of each feature; leaves are the per-output means of their
    partitions. When every feature is constant the stump degenerates to the
    global mean on both leaves (threshold +inf).
    """
    return SplitContext(np.asarray(features, dtype=np.float64)).fit(residuals)


def predict_stump(stump: Stump, features) -> np.ndarray:
    """Evaluate a stump on an N x d matrix, returning an N x K matrix."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError("features must be an N x d matrix")
    if not 0 <= stump.feature_index < features.shape[1]:
        raise ValueError(
            f"stump splits on feature {stump.feature_index} but data has "
            f"{features.shape[1]} features"
        )
    left = np.atleast_1d(np.asarray(stump.left_value, dtype=np.float64))
    right = np.atleast_1d(np.asarray(stump.right_value, dtype=np.float64))
    mask = features[:, stump.feature_index] <= stump.threshold
    return np.where(mask[:, None], left[None, :], right[None, :])
