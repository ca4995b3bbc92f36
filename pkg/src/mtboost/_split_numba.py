"""Numba-compiled split search; see _split_numpy for the reference semantics.

The accumulation order matches the numpy kernel exactly (prefix sums in
sorted order per feature, per-output squares summed in ascending output
index), so the two paths return bit-identical candidates.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def best_split(features, residuals, sort_idx, boundary):
    n, d = features.shape
    k = residuals.shape[1]
    best_f = -1
    best_pos = -1
    best_gain = -np.inf
    if n < 2:
        return best_f, best_pos, best_gain
    left = np.empty(k)
    total = np.empty(k)
    for j in range(d):
        has_candidate = False
        for pos in range(n - 1):
            if boundary[pos, j]:
                has_candidate = True
                break
        if not has_candidate:
            continue
        for c in range(k):
            total[c] = 0.0
            left[c] = 0.0
        for pos in range(n):
            row = sort_idx[pos, j]
            for c in range(k):
                total[c] += residuals[row, c]
        for pos in range(n - 1):
            row = sort_idx[pos, j]
            for c in range(k):
                left[c] += residuals[row, c]
            if not boundary[pos, j]:
                continue
            gain_left = 0.0
            gain_right = 0.0
            for c in range(k):
                gain_left += left[c] * left[c]
                r = total[c] - left[c]
                gain_right += r * r
            gain = gain_left / (pos + 1) + gain_right / (n - pos - 1)
            if gain > best_gain:
                best_gain = gain
                best_f = j
                best_pos = pos
    return best_f, best_pos, best_gain
