"""Pure-numpy split search for single-level regression trees.

Same contract and tie-breaking as the numba kernel: scan features in
ascending index order, candidate positions in ascending sorted order, keep
a candidate only on strict gain improvement. Gains use sequential prefix
sums so both kernels produce bit-identical results.
"""

from __future__ import annotations

import numpy as np


def best_split(features, residuals, sort_idx, boundary):
    """Find the gain-maximizing (feature, sorted position) split candidate.

    ``gain = sum_k S_L[k]^2 / n_L + sum_k S_R[k]^2 / n_R`` where S is the
    per-output residual sum of a side; total SSE equals the residual sum of
    squares minus this gain. Returns ``(feature, position, gain)`` with
    ``feature = -1`` when no feature offers two distinct values.
    """
    n = features.shape[0]
    best_f = -1
    best_pos = -1
    best_gain = -np.inf
    if n < 2:
        return best_f, best_pos, best_gain
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = np.float64(n) - n_left
    for j in range(features.shape[1]):
        mask = boundary[:, j]
        if not mask.any():
            continue
        rs = residuals[sort_idx[:, j]]
        csum = np.cumsum(rs, axis=0)
        total = csum[-1]
        left = csum[:-1]
        right = total[None, :] - left
        gain = (left * left).sum(axis=1) / n_left + (right * right).sum(axis=1) / n_right
        gain[~mask] = -np.inf
        pos = int(np.argmax(gain))
        if gain[pos] > best_gain:
            best_gain = float(gain[pos])
            best_f = j
            best_pos = pos
    return best_f, best_pos, best_gain
