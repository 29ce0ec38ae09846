"""Numeric backend contracts: hand oracles plus compiled/pure equivalence."""

import numpy as np
import pytest
from scipy.spatial.distance import cdist, pdist

from oclads import kernels
from oclads import _kernels_py as pure

try:
    from oclads import _kernels as compiled
except ImportError:  # pragma: no cover - build-environment dependent
    compiled = None

BACKENDS = [pytest.param(pure, id="pure")]
if compiled is not None:
    BACKENDS.append(pytest.param(compiled, id="compiled"))


def _sorted_pool(a, b):
    pooled = np.concatenate([a, b])
    order = np.argsort(pooled, kind="stable")
    values = np.ascontiguousarray(pooled[order])
    is_first = np.ascontiguousarray((order < len(a)).astype(np.float64))
    return values, is_first


@pytest.mark.parametrize("impl", BACKENDS)
class TestBackend:
    def test_t_l2_hand_case(self, impl):
        # pooled [0, .5, 1, 1.5]; F1-F2 steps are .5, 0, .5 on width-.5 gaps
        values, is_first = _sorted_pool(np.array([0.0, 1.0]), np.array([0.5, 1.5]))
        assert impl.t_l2_sorted(values, is_first, 2, 2) == pytest.approx(0.25, abs=1e-15)

    def test_t_l2_identical_samples_zero(self, impl):
        a = np.array([0.3, 0.7, 1.1])
        values, is_first = _sorted_pool(a, a.copy())
        assert impl.t_l2_sorted(values, is_first, 3, 3) == 0.0

    def test_t_l2_ties_carry_zero_width(self, impl):
        # all pooled values equal -> every interval has zero width
        values = np.array([2.0, 2.0, 2.0, 2.0])
        is_first = np.array([1.0, 0.0, 1.0, 0.0])
        assert impl.t_l2_sorted(values, is_first, 2, 2) == 0.0

    def test_perm_stats_rows_match_single_stat(self, impl):
        rng = np.random.default_rng(7)
        values = np.sort(rng.standard_normal(40))
        labels = np.zeros((25, 40))
        for row in labels:
            row[rng.choice(40, size=15, replace=False)] = 1.0
        stats = impl.perm_stats_sorted(values, np.ascontiguousarray(labels), 15, 25)
        for row, stat in zip(labels, stats):
            assert stat == pytest.approx(
                impl.t_l2_sorted(values, np.ascontiguousarray(row), 15, 25), rel=1e-12
            )

    def test_kernel_mean_scores_oracle(self, impl):
        rng = np.random.default_rng(3)
        train = rng.standard_normal((30, 4))
        test = rng.standard_normal((9, 4))
        h = 1.3
        expected = -np.exp(-cdist(test, train, "sqeuclidean") / (2 * h * h)).mean(axis=1)
        got = impl.kernel_mean_scores(
            np.ascontiguousarray(train), np.ascontiguousarray(test), h
        )
        np.testing.assert_allclose(got, expected, rtol=1e-12)

    def test_kernel_mean_scores_range(self, impl):
        rng = np.random.default_rng(4)
        train = rng.standard_normal((20, 3))
        scores = impl.kernel_mean_scores(
            np.ascontiguousarray(train), np.ascontiguousarray(train[:5]), 1.0
        )
        assert np.all(scores >= -1.0) and np.all(scores < 0.0)

    def test_pairwise_distances_matches_scipy(self, impl):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((17, 6))
        got = np.sort(np.asarray(impl.pairwise_distances(np.ascontiguousarray(x))))
        np.testing.assert_allclose(got, np.sort(pdist(x)), rtol=1e-12)


@pytest.mark.skipif(compiled is None, reason="compiled extension not built")
def test_backends_agree():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n1 = int(rng.integers(2, 60))
        n2 = int(rng.integers(2, 60))
        values, is_first = _sorted_pool(rng.standard_normal(n1), rng.standard_normal(n2))
        assert compiled.t_l2_sorted(values, is_first, n1, n2) == pytest.approx(
            pure.t_l2_sorted(values, is_first, n1, n2), rel=1e-12
        )
        labels = np.tile(is_first, (10, 1))
        labels = rng.permuted(labels, axis=1)
        np.testing.assert_allclose(
            compiled.perm_stats_sorted(values, np.ascontiguousarray(labels), n1, n2),
            pure.perm_stats_sorted(values, np.ascontiguousarray(labels), n1, n2),
            rtol=1e-12,
        )
    train = rng.standard_normal((40, 5))
    test = rng.standard_normal((13, 5))
    np.testing.assert_allclose(
        compiled.kernel_mean_scores(np.ascontiguousarray(train), np.ascontiguousarray(test), 0.9),
        pure.kernel_mean_scores(np.ascontiguousarray(train), np.ascontiguousarray(test), 0.9),
        rtol=1e-12,
    )
    np.testing.assert_allclose(
        np.sort(np.asarray(compiled.pairwise_distances(np.ascontiguousarray(train)))),
        np.sort(np.asarray(pure.pairwise_distances(np.ascontiguousarray(train)))),
        rtol=1e-12,
    )


def test_dispatch_names_a_backend():
    assert kernels.backend_name() in ("compiled", "pure-python")
    assert kernels.backend_name() == ("compiled" if kernels.COMPILED else "pure-python")
