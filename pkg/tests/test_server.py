"""Server behavior: replay buffer, policies, round processing."""

import numpy as np
import pytest

from conftest import make_batch, make_sample
from oclads.device import UplinkPayload
from oclads.model import ModelParams, TrainConfig, init_params
from oclads.server import (
    PolicyKind,
    ReplayBuffer,
    ServerState,
    UpdatePolicy,
    buffer_insert,
    make_random_schedule,
    process_round,
)
from oclads.shiftdetect import ShiftTestConfig


def payload_from_batch(batch, rng=None):
    scores = np.sort((rng or np.random.default_rng(0)).random(len(batch)))[::-1]
    return UplinkPayload(round=batch.round, selected=tuple(batch.samples), scores=scores)


def fresh_server(policy, **kwargs):
    params = init_params(2, 4, np.random.default_rng(0))
    defaults = dict(
        master_model=params,
        policy=policy,
        buffer=ReplayBuffer(64),
        detector_cfg=ShiftTestConfig(n_permutations=59),
        train_cfg=TrainConfig(steps_per_batch=3, minibatch_size=8),
        calibration_rounds=2,
    )
    defaults.update(kwargs)
    return ServerState(**defaults)


class TestPolicies:
    def test_factories(self):
        assert UpdatePolicy.oclads().kind == PolicyKind.OCLADS
        assert UpdatePolicy.all_update().kind == PolicyKind.ALL_UPDATE
        assert UpdatePolicy.no_update().kind == PolicyKind.NO_UPDATE
        oracle = UpdatePolicy.oracle((3, 9))
        assert oracle.kind == PolicyKind.ORACLE and oracle.rounds == frozenset({3, 9})
        rand = UpdatePolicy.random_update(frozenset({4, 8}))
        assert rand.kind == PolicyKind.RANDOM_UPDATE and rand.rounds == frozenset({4, 8})

    def test_detector_defaults_to_policy_need(self):
        assert fresh_server(UpdatePolicy.oclads()).run_detector is True
        assert fresh_server(UpdatePolicy.all_update()).run_detector is False
        assert fresh_server(UpdatePolicy.no_update(), run_detector=True).run_detector is True


class TestReplayBuffer:
    def test_appends_until_capacity(self):
        buf = ReplayBuffer(5)
        rng = np.random.default_rng(0)
        buf.insert([make_sample(0, index=i) for i in range(3)], rng)
        assert len(buf) == 3
        buf.insert([make_sample(1, index=i) for i in range(2)], rng)
        assert len(buf) == 5 and buf.anomaly_count() == 2

    def test_eviction_targets_majority_class(self):
        buf = ReplayBuffer(10)
        rng = np.random.default_rng(1)
        buf.insert([make_sample(0, index=i) for i in range(7)], rng)
        buf.insert([make_sample(1, index=i) for i in range(3)], rng)
        # inserts walk the counts (7,3)->(6,4)->(5,5)->(4,6); the fourth
        # insert sees ones as the majority and recycles a one instead
        for _ in range(4):
            buf.insert([make_sample(1)], rng)
        labels = buf.labels()
        assert len(buf) == 10
        assert (labels == 1).sum() == 6 and (labels == 0).sum() == 4

    def test_eviction_switches_when_majority_flips(self):
        buf = ReplayBuffer(4)
        rng = np.random.default_rng(2)
        buf.insert([make_sample(1, index=i) for i in range(4)], rng)
        buf.insert([make_sample(0)], rng)  # all-ones: a one is evicted
        assert buf.anomaly_count() == 3
        buf.insert([make_sample(0)], rng)
        buf.insert([make_sample(0)], rng)  # 2/2 tie counts class 0 as majority
        assert buf.anomaly_count() == 2
        assert len(buf) == 4

    def test_anomaly_count_monotone_under_minority_pressure(self):
        buf = ReplayBuffer(50)
        rng = np.random.default_rng(3)
        buf.insert([make_sample(0, index=i) for i in range(50)], rng)
        prev = buf.anomaly_count()
        for i in range(200):
            buf.insert([make_sample(int(rng.random() < 0.1), index=i)], rng)
            count = buf.anomaly_count()
            # the count can only drop once ones became the strict majority
            assert count >= prev or prev >= 26
            prev = count
            assert len(buf) == 50

    def test_feature_matrix_exclusion(self):
        buf = ReplayBuffer(10)
        rng = np.random.default_rng(4)
        buf.insert([make_sample(0, round_index=1, value=1.0)], rng)
        buf.insert([make_sample(0, round_index=2, value=2.0)], rng)
        buf.insert([make_sample(0, round_index=2, value=3.0)], rng)
        assert buf.feature_matrix().shape == (3, 1)
        kept = buf.feature_matrix(exclude_round=2)
        assert kept.shape == (1, 1) and kept[0, 0] == 1.0
        assert buf.feature_matrix(exclude_round=1).shape == (2, 1)

    def test_empty_matrix_shape(self):
        assert ReplayBuffer(3).feature_matrix().shape == (0, 0)

    def test_capacity_validation(self):
        with pytest.raises(ValueError):
            ReplayBuffer(0)

    def test_buffer_insert_helper_returns_buffer(self):
        buf = ReplayBuffer(3)
        assert buffer_insert(buf, [make_sample(0)], np.random.default_rng(0)) is buf


class TestProcessRound:
    def _batches(self, n, size=12):
        rng = np.random.default_rng(10)
        return [make_batch(size, round_index=i, rng=rng) for i in range(1, n + 1)]

    def test_rounds_must_increase(self):
        server = fresh_server(UpdatePolicy.no_update())
        payload = payload_from_batch(self._batches(1)[0])
        process_round(server, payload)
        with pytest.raises(ValueError, match="increasing"):
            process_round(server, payload)

    def test_detector_warmup_sequence(self):
        server = fresh_server(UpdatePolicy.oclads())
        outcomes = [process_round(server, payload_from_batch(b)) for b in self._batches(4)]
        # round 1: nothing received yet; round 2: training data excludes the
        # only stored round; round 3 onward: testable
        assert [o.testable for o in outcomes] == [False, False, True, True]
        assert outcomes[0].verdict is None
        assert outcomes[2].verdict is not None

    def test_no_update_never_transmits(self):
        server = fresh_server(UpdatePolicy.no_update())
        assert all(
            not process_round(server, payload_from_batch(b)).transmitted
            for b in self._batches(5)
        )

    def test_all_update_always_transmits(self):
        server = fresh_server(UpdatePolicy.all_update())
        assert all(
            process_round(server, payload_from_batch(b)).transmitted for b in self._batches(5)
        )

    def test_warmup_rounds_transmit_for_scheduled_policies(self):
        server = fresh_server(UpdatePolicy.oracle((4,)), calibration_rounds=2)
        outcomes = [process_round(server, payload_from_batch(b)) for b in self._batches(5)]
        assert [o.transmitted for o in outcomes] == [True, True, False, True, False]

    def test_oclads_transmits_only_on_detection(self):
        server = fresh_server(UpdatePolicy.oclads(), calibration_rounds=2)
        for b in self._batches(6):
            outcome = process_round(server, payload_from_batch(b))
            if b.round <= 2:
                assert outcome.transmitted
            else:
                detected = outcome.verdict is not None and outcome.verdict.shift_detected
                assert outcome.transmitted == detected

    def test_downlink_matches_master(self):
        server = fresh_server(UpdatePolicy.all_update())
        outcome = process_round(server, payload_from_batch(self._batches(1)[0]))
        assert outcome.downlink is not None
        restored = ModelParams.from_record(outcome.downlink)
        np.testing.assert_array_equal(restored.w1, server.master_model.w1)

    def test_master_trajectory_ignores_policy_kind(self):
        # the policy decides transmission only; training is identical
        batches = self._batches(6)
        servers = [
            fresh_server(UpdatePolicy.no_update(), model_seed=5),
            fresh_server(UpdatePolicy.all_update(), model_seed=5),
            fresh_server(UpdatePolicy.oclads(), model_seed=5),
        ]
        for batch in batches:
            masters = []
            for server in servers:
                process_round(server, payload_from_batch(batch))
                masters.append(server.master_model)
            for other in masters[1:]:
                np.testing.assert_array_equal(masters[0].w1, other.w1)
                np.testing.assert_array_equal(masters[0].w2, other.w2)

    def test_buffer_grows_with_uplinks(self):
        server = fresh_server(UpdatePolicy.no_update())
        sizes = [
            process_round(server, payload_from_batch(b)).buffer_size for b in self._batches(4)
        ]
        assert sizes == [12, 24, 36, 48]


class TestRandomSchedule:
    def test_counts_range_and_determinism(self):
        rounds = make_random_schedule(400, 30, 10, np.random.default_rng(8))
        assert len(rounds) == 30
        assert all(10 < r <= 400 for r in rounds)
        again = make_random_schedule(400, 30, 10, np.random.default_rng(8))
        assert rounds == again

    def test_roughly_periodic(self):
        rounds = sorted(make_random_schedule(400, 39, 10, np.random.default_rng(9)))
        gaps = np.diff(rounds)
        assert gaps.max() <= 30  # no starved stretch: segments are ~10 rounds

    def test_zero_updates(self):
        assert make_random_schedule(100, 0, 10, np.random.default_rng(0)) == frozenset()

    def test_too_many_updates_rejected(self):
        with pytest.raises(ValueError):
            make_random_schedule(20, 15, 10, np.random.default_rng(0))
