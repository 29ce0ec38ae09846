"""Two-sample distribution-shift test over one-class novelty scores.

Pipeline: fit a one-class scorer on reference data, score the two batches
under comparison, and compare the score samples with an integrated squared
ECDF difference whose null distribution is obtained by permutation. The
permutation stage works on the pooled score ranks, so the p-value depends
only on the ordering of the scores — any strictly increasing rescaling of
the scorer output yields the identical verdict.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from . import kernels

MAHALANOBIS_RIDGE = 1e-6


@dataclass(frozen=True)
class ShiftTestConfig:
    alpha: float = 0.05
    n_permutations: int = 199
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.n_permutations < 1:
            raise ValueError("n_permutations must be >= 1")


@dataclass(frozen=True)
class ShiftVerdict:
    p_value: float
    shift_detected: bool
    t_observed: float

    def __post_init__(self) -> None:
        if not 0.0 < self.p_value <= 1.0:
            raise ValueError("p_value must lie in (0, 1]")


class KernelMeanScorer:
    """Novelty score s(x) = -(1/n) sum_t exp(-||x - x_t||^2 / (2 h^2)).

    Bandwidth h is the median pairwise distance of the training set
    (falling back to 1 when the median is zero). Scores are higher for
    points far from the training mass.
    """

    def __init__(self, training: np.ndarray) -> None:
        training = np.asarray(training, dtype=np.float64)
        if training.ndim != 2 or training.shape[0] < 2:
            raise ValueError("scorer needs at least 2 training points")
        dists = kernels.pairwise_distances(np.ascontiguousarray(training))
        h = float(np.median(dists))
        if h == 0.0:
            h = 1.0
        self._train = np.ascontiguousarray(training)
        self.bandwidth = h

    def score(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=np.float64)))
        return kernels.kernel_mean_scores(self._train, x, self.bandwidth)


class MahalanobisScorer:
    """Novelty score (x - mu)^T (Sigma + ridge*I)^{-1} (x - mu)."""

    def __init__(self, training: np.ndarray, ridge: float = MAHALANOBIS_RIDGE) -> None:
        training = np.asarray(training, dtype=np.float64)
        if training.ndim != 2 or training.shape[0] < 2:
            raise ValueError("scorer needs at least 2 training points")
        self.mean = training.mean(axis=0)
        cov = np.cov(training, rowvar=False, bias=True)
        cov = np.atleast_2d(cov) + ridge * np.eye(training.shape[1])
        self._precision = np.linalg.inv(cov)

    def score(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        centered = x - self.mean
        return np.einsum("ij,jk,ik->i", centered, self._precision, centered)


SCORER_VARIANTS = {"kernel_mean": KernelMeanScorer, "mahalanobis": MahalanobisScorer}


def fit_scorer(training: np.ndarray, variant: str = "kernel_mean"):
    try:
        cls = SCORER_VARIANTS[variant]
    except KeyError:
        raise ValueError(f"unknown scorer variant: {variant!r}") from None
    return cls(training)


class Ecdf:
    """Right-continuous empirical CDF: F(x) = #{s <= x} / n."""

    def __init__(self, scores: np.ndarray) -> None:
        scores = np.asarray(scores, dtype=np.float64)
        if scores.size == 0:
            raise ValueError("ecdf needs at least one score")
        self._sorted = np.sort(scores)
        self._n = scores.size

    def __call__(self, x) -> np.ndarray | float:
        result = np.searchsorted(self._sorted, x, side="right") / self._n
        return float(result) if np.isscalar(x) else result


def ecdf(scores: np.ndarray) -> Ecdf:
    return Ecdf(scores)


def _pooled_sorted(scores_cal: np.ndarray, scores_test: np.ndarray):
    """Pooled values in ascending order plus the is-calibration indicator."""
    n1, n2 = len(scores_cal), len(scores_test)
    pooled = np.concatenate([scores_cal, scores_test])
    order = np.argsort(pooled, kind="stable")
    values = np.ascontiguousarray(pooled[order])
    is_cal = np.ascontiguousarray((order < n1).astype(np.float64))
    return values, is_cal, n1, n2


def t_l2(scores_cal: np.ndarray, scores_test: np.ndarray) -> float:
    """Integral of the squared ECDF difference, in closed form.

    Over the pooled sorted values v_1 <= ... <= v_m both step functions are
    constant on [v_t, v_{t+1}), so the integral is the sum of
    (F_cal(v_t) - F_test(v_t))^2 (v_{t+1} - v_t); outside [v_1, v_m] the two
    CDFs agree (both 0, then both 1) and contribute nothing.
    """
    scores_cal = np.asarray(scores_cal, dtype=np.float64)
    scores_test = np.asarray(scores_test, dtype=np.float64)
    if scores_cal.size == 0 or scores_test.size == 0:
        raise ValueError("both score lists must be nonempty")
    values, is_cal, n1, n2 = _pooled_sorted(scores_cal, scores_test)
    return float(kernels.t_l2_sorted(values, is_cal, n1, n2))


def permutation_test(
    scorer,
    cal_batch: np.ndarray,
    test_batch: np.ndarray,
    cfg: ShiftTestConfig,
    rng: np.random.Generator | None = None,
) -> ShiftVerdict:
    """Permutation two-sample test between the scored batches.

    Each point is scored once; the pooled scores are replaced by their
    average ranks (which preserves the verdict under any strictly increasing
    transform of the scores) and the statistic is recomputed for
    ``cfg.n_permutations`` random reassignments of the pooled points to the
    two groups. p = (1 + #{T_perm >= T_obs}) / (n_permutations + 1).
    """
    cal_batch = np.atleast_2d(np.asarray(cal_batch, dtype=np.float64))
    test_batch = np.atleast_2d(np.asarray(test_batch, dtype=np.float64))
    if cal_batch.shape[0] == 0 or test_batch.shape[0] == 0:
        raise ValueError("both batches must be nonempty")
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)

    scores_cal = np.asarray(scorer.score(cal_batch), dtype=np.float64)
    scores_test = np.asarray(scorer.score(test_batch), dtype=np.float64)
    pooled = np.concatenate([scores_cal, scores_test])
    ranks = rankdata(pooled, method="average")
    n1 = len(scores_cal)

    values, is_cal, n1, n2 = _pooled_sorted(ranks[:n1], ranks[n1:])
    t_obs = float(kernels.t_l2_sorted(values, is_cal, n1, n2))

    assignments = np.tile(is_cal, (cfg.n_permutations, 1))
    assignments = rng.permuted(assignments, axis=1)
    t_perm = kernels.perm_stats_sorted(values, np.ascontiguousarray(assignments), n1, n2)

    n_ge = int(np.count_nonzero(t_perm >= t_obs))
    p_value = (1 + n_ge) / (cfg.n_permutations + 1)
    return ShiftVerdict(p_value=p_value, shift_detected=p_value <= cfg.alpha, t_observed=t_obs)
