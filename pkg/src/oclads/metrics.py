"""Scoring utilities: macro F1, its running online average, detection matching."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .stream import ShiftSchedule


def macro_f1(truth, pred, include_absent: bool = True) -> float:
    """Mean per-class F1 over classes {0, 1}.

    Per-class F1 is 2*tp / (2*tp + fp + fn), which is 0 whenever precision
    and recall are both unavailable or zero. A class absent from BOTH truth
    and prediction scores a vacuous 1.0 by default, so a perfectly predicted
    anomaly-free batch scores 1.0 rather than 0.5; pass
    ``include_absent=False`` to drop absent classes from the mean instead.
    """
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: {truth.shape} vs {pred.shape}")
    if truth.size == 0:
        raise ValueError("macro_f1 needs at least one sample")
    scores = []
    for cls in (0, 1):
        in_truth = truth == cls
        in_pred = pred == cls
        tp = int(np.count_nonzero(in_truth & in_pred))
        fp = int(np.count_nonzero(~in_truth & in_pred))
        fn = int(np.count_nonzero(in_truth & ~in_pred))
        if tp + fp + fn == 0:
            if include_absent:
                scores.append(1.0)
            continue
        scores.append(2 * tp / (2 * tp + fp + fn))
    return float(np.mean(scores))


def online_f1(batch_f1_history) -> float:
    """Running online score: the arithmetic mean of the per-batch history."""
    history = np.asarray(batch_f1_history, dtype=np.float64)
    if history.size == 0:
        raise ValueError("online_f1 needs a nonempty history")
    return float(history.mean())


@dataclass(frozen=True)
class DetectionRecord:
    round: int
    detected: bool
    matched_true_shift: bool
    is_false_alarm: bool


@dataclass(frozen=True)
class DetectionSummary:
    true_detections: int
    false_alarms: int
    missed_shifts: int
    n_true_shifts: int
    n_detections: int
    records: tuple[DetectionRecord, ...] = field(repr=False, default=())


def match_detections(
    detections, schedule: ShiftSchedule, window: int = 0
) -> DetectionSummary:
    """Match detection rounds against the true shift rounds.

    ``detections`` is an iterable of (round, detected) pairs. A detection at
    round i is true when an unmatched true shift lies within the last
    ``window`` rounds (i.e. in [i - window, i]); window 0 means exact-round
    matching. Each true shift is matched at most once, to its earliest
    matching detection, preferring the most recent unmatched shift; leftover
    detections are false alarms and leftover shifts are misses.
    """
    if window < 0:
        raise ValueError("window must be >= 0")
    detected_rounds = sorted(int(r) for r, flag in detections if flag)
    unmatched = set(schedule.shift_rounds)
    records = []
    true_detections = 0
    for r in detected_rounds:
        candidates = [s for s in unmatched if r - window <= s <= r]
        if candidates:
            unmatched.remove(max(candidates))
            true_detections += 1
            records.append(DetectionRecord(r, True, True, False))
        else:
            records.append(DetectionRecord(r, True, False, True))
    return DetectionSummary(
        true_detections=true_detections,
        false_alarms=len(detected_rounds) - true_detections,
        missed_shifts=len(unmatched),
        n_true_shifts=len(schedule.shift_rounds),
        n_detections=len(detected_rounds),
        records=tuple(records),
    )
