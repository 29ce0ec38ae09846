"""Pure NumPy implementations of the numeric hot paths.

Fallback backend used when the compiled extension is not available; see
``oclads.kernels`` for the selection logic. Both backends implement the
same contracts and are covered by the same tests.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import pdist

COMPILED = False


def t_l2_sorted(values: np.ndarray, is_first: np.ndarray, n1: int, n2: int) -> float:
    """Integrated squared difference of two ECDFs over pre-sorted pooled values.

    ``values`` holds the pooled sample ascending; ``is_first[t]`` is 1 when
    the t-th pooled value belongs to the first sample, 0 otherwise. Equal
    adjacent values carry zero width, so ties contribute exactly nothing.
    """
    values = np.asarray(values, dtype=np.float64)
    first = np.asarray(is_first, dtype=np.float64)
    c1 = np.cumsum(first)
    idx = np.arange(1, values.shape[0] + 1, dtype=np.float64)
    gap = c1 / n1 - (idx - c1) / n2
    return float(np.dot(gap[:-1] ** 2, np.diff(values)))


def perm_stats_sorted(
    values: np.ndarray, labels: np.ndarray, n1: int, n2: int
) -> np.ndarray:
    """t_l2_sorted evaluated for every row of a label-assignment matrix.

    Each row of ``labels`` is one repartition of the pooled values into
    groups of sizes n1 and n2 (exactly n1 ones per row).
    """
    values = np.asarray(values, dtype=np.float64)
    lab = np.asarray(labels, dtype=np.float64)
    c1 = np.cumsum(lab, axis=1)
    idx = np.arange(1, values.shape[0] + 1, dtype=np.float64)
    gap = c1 / n1 - (idx[None, :] - c1) / n2
    return (gap[:, :-1] ** 2) @ np.diff(values)


def kernel_mean_scores(
    train: np.ndarray, test: np.ndarray, bandwidth: float
) -> np.ndarray:
    """Negative mean RBF similarity of each test row to the training rows.

    Scores lie in [-1, 0); larger means farther from the training mass.
    """
    train = np.ascontiguousarray(train, dtype=np.float64)
    test = np.ascontiguousarray(test, dtype=np.float64)
    inv = 1.0 / (2.0 * bandwidth * bandwidth)
    out = np.empty(test.shape[0], dtype=np.float64)
    block = 64  # bounds the (block, n_train, dim) scratch allocation
    for start in range(0, test.shape[0], block):
        chunk = test[start : start + block]
        d2 = ((chunk[:, None, :] - train[None, :, :]) ** 2).sum(axis=2)
        out[start : start + chunk.shape[0]] = -np.exp(-d2 * inv).mean(axis=1)
    return out


def pairwise_distances(x: np.ndarray) -> np.ndarray:
    """Condensed Euclidean distance vector, length n*(n-1)/2."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape[0] < 2:
        return np.empty(0, dtype=np.float64)
    return pdist(x)
