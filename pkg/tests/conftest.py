"""Shared fixtures and small helpers for the test suite."""

import numpy as np
import pytest

from oclads.experiment import ExperimentConfig
from oclads.stream import Batch, Sample


def make_batch(scores_or_n, round_index=1, dim=2, rng=None):
    """Batch with dummy features; pass an int for size or reuse a length."""
    n = scores_or_n if isinstance(scores_or_n, int) else len(scores_or_n)
    if rng is None:
        rng = np.random.default_rng(0)
    samples = [
        Sample(features=rng.standard_normal(dim), label=0, round=round_index, index_in_batch=j)
        for j in range(n)
    ]
    return Batch(round=round_index, samples=samples)


def make_sample(label, round_index=1, index=0, dim=1, value=0.0):
    return Sample(
        features=np.full(dim, value), label=label, round=round_index, index_in_batch=index
    )


@pytest.fixture
def tiny_cfg():
    """A config small enough that full runs take well under a second."""
    return ExperimentConfig(
        n_rounds=12,
        batch_size=16,
        buffer_capacity=200,
        n_permutations=59,
        bootstrap_normal=30,
        bootstrap_anomalous=8,
        bootstrap_steps=40,
        calibration_rounds=4,
        k_min=5,
        min_gap=3,
        shift_prob=0.3,
    )
