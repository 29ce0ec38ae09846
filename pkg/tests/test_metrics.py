"""Scoring metrics and detection/shift matching."""

import numpy as np
import pytest

from oclads.metrics import macro_f1, match_detections, online_f1
from oclads.stream import CorruptionKind, Regime, ShiftEntry, ShiftSchedule


def schedule_at(rounds, n_rounds=100):
    kinds = [CorruptionKind.SCALE, CorruptionKind.SHIFT_MEAN, CorruptionKind.ROTATE_PAIR]
    severities = [3, 5]
    entries = tuple(
        ShiftEntry(r, Regime(kinds[i % 3], severities[i % 2])) for i, r in enumerate(rounds)
    )
    return ShiftSchedule(entries=entries, n_rounds=n_rounds)


class TestMacroF1:
    def test_hand_worked_example(self):
        # class 0: 2*2/(2*2+0+1) = 4/5; class 1: 2*1/(2*1+1+0) = 2/3
        assert macro_f1([0, 0, 0, 1], [0, 0, 1, 1]) == pytest.approx(11 / 15, abs=1e-15)

    def test_perfect_and_inverted(self):
        assert macro_f1([0, 1, 0, 1], [0, 1, 0, 1]) == 1.0
        assert macro_f1([0, 1], [1, 0]) == 0.0

    def test_absent_class_conventions(self):
        assert macro_f1([0, 0], [0, 0], include_absent=True) == 1.0
        assert macro_f1([0, 0], [0, 0], include_absent=False) == 1.0
        # class 1 appears in predictions only: it scores 0 either way
        assert macro_f1([0, 0], [0, 1], include_absent=True) == pytest.approx(1 / 3)
        assert macro_f1([0, 0], [0, 1], include_absent=False) == pytest.approx(1 / 3)

    def test_label_swap_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            truth = rng.integers(0, 2, 30)
            pred = rng.integers(0, 2, 30)
            assert macro_f1(truth, pred) == pytest.approx(macro_f1(1 - truth, 1 - pred))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            macro_f1([0, 1], [0])


class TestOnlineF1:
    def test_is_the_running_mean(self):
        history = [0.5, 1.0, 0.25]
        assert online_f1(history) == pytest.approx(np.mean(history))
        assert online_f1([0.7]) == 0.7

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            online_f1([])


class TestMatchDetections:
    def test_exact_round_matching(self):
        schedule = schedule_at([10, 20, 30])
        detections = [(10, True), (15, True), (20, False), (30, True)]
        summary = match_detections(detections, schedule)
        assert summary.true_detections == 2
        assert summary.false_alarms == 1
        assert summary.missed_shifts == 1
        assert summary.n_true_shifts == 3
        assert summary.n_detections == 3

    def test_window_extends_backwards(self):
        schedule = schedule_at([10])
        assert match_detections([(12, True)], schedule, window=0).true_detections == 0
        assert match_detections([(12, True)], schedule, window=2).true_detections == 1
        # the window never looks forward
        assert match_detections([(9, True)], schedule, window=5).true_detections == 0

    def test_prefers_most_recent_shift(self):
        schedule = schedule_at([3, 5])
        summary = match_detections([(5, True), (6, True)], schedule, window=3)
        # round 5 takes the shift at 5; round 6 then matches the one at 3
        assert summary.true_detections == 2
        assert summary.missed_shifts == 0

    def test_each_shift_matched_once(self):
        schedule = schedule_at([5])
        summary = match_detections([(5, True), (5, True)], schedule)
        assert summary.true_detections == 1
        assert summary.false_alarms == 1

    def test_records_flag_false_alarms(self):
        schedule = schedule_at([5])
        summary = match_detections([(2, True), (5, True)], schedule)
        assert [(r.round, r.is_false_alarm) for r in summary.records] == [
            (2, True),
            (5, False),
        ]

    def test_negative_window_rejected(self):
        with pytest.raises(ValueError):
            match_detections([], schedule_at([5]), window=-1)
