"""Device-side state machine: inference, sample selection, model installs.

The device scores each incoming batch with its currently installed model,
uploads everything during the calibration phase, and afterwards uploads the
most anomalous samples: all samples whose anomaly score clears the softmax
threshold, but never fewer than ``k_min``. It never inspects the stream for
shifts itself; that is the server's job.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, predict_batch
from .stream import Batch, Sample


@dataclass(frozen=True)
class UplinkPayload:
    """Selected samples for one round, ordered by anomaly score (descending)."""

    round: int
    selected: tuple[Sample, ...]
    scores: np.ndarray

    def __post_init__(self) -> None:
        if len(self.selected) != len(self.scores):
            raise ValueError("scores must align with selected samples")
        if np.any(np.diff(self.scores) > 0):
            raise ValueError("scores must be sorted non-increasing")

    def __len__(self) -> int:
        return len(self.selected)

    @property
    def feature_matrix(self) -> np.ndarray:
        return np.stack([s.features for s in self.selected])

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.selected], dtype=np.int64)


@dataclass
class DeviceState:
    installed_model: ModelParams
    calibration_rounds: int = 10
    s_threshold: float = 0.25
    k_min: int = 15
    round: int = 0
    installs: int = field(default=0, repr=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.s_threshold <= 1.0:
            raise ValueError("s_threshold must lie in [0, 1]")
        if self.k_min < 0:
            raise ValueError("k_min must be >= 0")


def infer_batch(state: DeviceState, batch: Batch) -> tuple[np.ndarray, np.ndarray]:
    """Predicted labels and anomaly scores (class-1 softmax) for the batch."""
    probs, labels = predict_batch(state.installed_model, batch.feature_matrix)
    return labels, probs[:, 1]


def select_samples(state: DeviceState, batch: Batch, scores: np.ndarray) -> UplinkPayload:
    """Pick the round's uplink: full batch through calibration, top-K after.

    Post-calibration, samples are ranked by anomaly score (ties keep batch
    order) and the top K_i = max(k_min, #{scores >= s_threshold}) are sent,
    clamped to the batch size.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if len(scores) != len(batch):
        raise ValueError("one score per sample required")
    order = np.argsort(-scores, kind="stable")
    if batch.round <= state.calibration_rounds:
        k = len(batch)
    else:
        above = int(np.count_nonzero(scores >= state.s_threshold))
        k = min(len(batch), max(state.k_min, above))
    keep = order[:k]
    return UplinkPayload(
        round=batch.round,
        selected=tuple(batch.samples[j] for j in keep),
        scores=scores[keep],
    )


def install_model(state: DeviceState, record: dict) -> None:
    """Replace the installed model from a downlink payload (takes effect next round)."""
    params = ModelParams.from_record(record)
    if params.input_dim != state.installed_model.input_dim:
        raise ValueError(
            f"downlink model expects {params.input_dim} features, device uses "
            f"{state.installed_model.input_dim}"
        )
    state.installed_model = params
    state.installs += 1


def device_round(state: DeviceState, batch: Batch) -> tuple[np.ndarray, np.ndarray, UplinkPayload]:
    """One full device step: infer with the installed model, then select the uplink."""
    state.round = batch.round
    predictions, scores = infer_batch(state, batch)
    payload = select_samples(state, batch, scores)
    return predictions, scores, payload
