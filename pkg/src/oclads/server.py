"""Edge-server state machine: replay buffer, continual training, update policy.

Every round the server (1) runs the shift test between the previous and the
current uplink when the active policy consumes verdicts, (2) stores the new
samples in the replay buffer, (3) retrains the master model on the buffer,
and (4) decides whether to transmit the retrained model downlink. Training
happens every round under every policy; the policy gates only transmission.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .device import UplinkPayload
from .model import ModelParams, TrainConfig, train_steps
from .shiftdetect import ShiftTestConfig, ShiftVerdict, fit_scorer, permutation_test
from .stream import Sample


class PolicyKind(str, Enum):
    OCLADS = "oclads"
    ALL_UPDATE = "all_update"
    RANDOM_UPDATE = "random_update"
    ORACLE = "oracle"
    NO_UPDATE = "no_update"


@dataclass(frozen=True)
class UpdatePolicy:
    """Transmission rule; ``rounds`` carries the policy's round set when it has one.

    For RANDOM_UPDATE it is the pre-drawn update schedule (paired to the
    OCLADS budget); for ORACLE it is the true shift rounds.
    """

    kind: PolicyKind
    rounds: frozenset[int] = frozenset()

    @classmethod
    def oclads(cls) -> "UpdatePolicy":
        return cls(PolicyKind.OCLADS)

    @classmethod
    def all_update(cls) -> "UpdatePolicy":
        return cls(PolicyKind.ALL_UPDATE)

    @classmethod
    def random_update(cls, schedule) -> "UpdatePolicy":
        return cls(PolicyKind.RANDOM_UPDATE, frozenset(schedule))

    @classmethod
    def oracle(cls, true_shift_rounds) -> "UpdatePolicy":
        return cls(PolicyKind.ORACLE, frozenset(true_shift_rounds))

    @classmethod
    def no_update(cls) -> "UpdatePolicy":
        return cls(PolicyKind.NO_UPDATE)


class ReplayBuffer:
    """Bounded sample store with majority-class random replacement when full."""

    def __init__(self, capacity: int = 3000) -> None:
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.items: list[Sample] = []

    def __len__(self) -> int:
        return len(self.items)

    def insert(self, samples, rng: np.random.Generator) -> None:
        """Append while below capacity; afterwards each incoming sample
        replaces a uniformly random sample of the current majority class."""
        for sample in samples:
            if len(self.items) < self.capacity:
                self.items.append(sample)
                continue
            labels = np.array([s.label for s in self.items])
            majority = 0 if (labels == 0).sum() >= (labels == 1).sum() else 1
            candidates = np.flatnonzero(labels == majority)
            if candidates.size == 0:
                victim = int(rng.integers(len(self.items)))
            else:
                victim = int(candidates[rng.integers(candidates.size)])
            self.items[victim] = sample

    def feature_matrix(self, exclude_round: int | None = None) -> np.ndarray:
        kept = [s for s in self.items if s.round != exclude_round]
        if not kept:
            return np.empty((0, 0))
        return np.stack([s.features for s in kept])

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.items], dtype=np.int64)

    def anomaly_count(self) -> int:
        return sum(s.label for s in self.items)


def buffer_insert(buffer: ReplayBuffer, samples, rng: np.random.Generator) -> ReplayBuffer:
    buffer.insert(samples, rng)
    return buffer


@dataclass
class ServerState:
    master_model: ModelParams
    policy: UpdatePolicy
    buffer: ReplayBuffer = field(default_factory=ReplayBuffer)
    detector_cfg: ShiftTestConfig = field(default_factory=ShiftTestConfig)
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    calibration_rounds: int = 10
    scorer_variant: str = "kernel_mean"
    model_seed: int = 0
    detector_seed: int = 0
    run_detector: bool | None = None  # None: only when the policy consumes verdicts
    last_round_received: tuple[Sample, ...] | None = None
    last_round: int = 0

    def __post_init__(self) -> None:
        if self.run_detector is None:
            self.run_detector = self.policy.kind == PolicyKind.OCLADS


@dataclass(frozen=True)
class RoundOutcome:
    round: int
    transmitted: bool
    downlink: dict | None
    verdict: ShiftVerdict | None
    testable: bool
    buffer_size: int


def _should_transmit(
    policy: UpdatePolicy, round_index: int, calibration_rounds: int, verdict: ShiftVerdict | None
) -> bool:
    kind = policy.kind
    if kind == PolicyKind.NO_UPDATE:
        return False
    if kind == PolicyKind.ALL_UPDATE:
        return True
    if round_index <= calibration_rounds:
        return True  # warm-up: all transmitting policies push the retrained model
    if kind == PolicyKind.OCLADS:
        return verdict is not None and verdict.shift_detected
    return round_index in policy.rounds


def process_round(state: ServerState, payload: UplinkPayload) -> RoundOutcome:
    """Run one server round; see the module docstring for the step order."""
    if payload.round <= state.last_round:
        raise ValueError(
            f"rounds must be strictly increasing: got {payload.round} after {state.last_round}"
        )
    round_index = payload.round

    verdict: ShiftVerdict | None = None
    testable = False
    if state.run_detector and state.last_round_received:
        training = state.buffer.feature_matrix(exclude_round=state.last_round)
        if training.shape[0] >= 2:
            testable = True
            scorer = fit_scorer(training, state.scorer_variant)
            cal = np.stack([s.features for s in state.last_round_received])
            rng = np.random.default_rng([state.detector_seed, round_index])
            verdict = permutation_test(
                scorer, cal, payload.feature_matrix, state.detector_cfg, rng
            )

    round_rng = np.random.default_rng([state.model_seed, round_index])
    state.buffer.insert(payload.selected, round_rng)
    state.master_model = train_steps(
        state.master_model,
        state.buffer.feature_matrix(),
        state.buffer.labels(),
        state.train_cfg,
        round_rng,
    )

    transmitted = _should_transmit(state.policy, round_index, state.calibration_rounds, verdict)
    downlink = state.master_model.to_record() if transmitted else None

    state.last_round_received = payload.selected
    state.last_round = round_index
    return RoundOutcome(
        round=round_index,
        transmitted=transmitted,
        downlink=downlink,
        verdict=verdict,
        testable=testable,
        buffer_size=len(state.buffer),
    )


def make_random_schedule(
    n_rounds: int, n_updates: int, calibration_rounds: int, rng: np.random.Generator
) -> frozenset[int]:
    """Spread ``n_updates`` rounds over (calibration_rounds, n_rounds].

    The window is split into equal segments, one update per segment, drawn
    from a Gaussian at the segment midpoint (sigma = segment length / 4),
    rounded and clamped into the segment — so updates are roughly periodic
    with jitter, and segments being disjoint keeps the rounds distinct.
    """
    window = n_rounds - calibration_rounds
    if n_updates > window:
        raise ValueError(f"cannot place {n_updates} updates in {window} rounds")
    if n_updates <= 0:
        return frozenset()
    chosen: set[int] = set()
    for k in range(n_updates):
        lo = calibration_rounds + (window * k) // n_updates + 1
        hi = calibration_rounds + (window * (k + 1)) // n_updates
        mid = 0.5 * (lo + hi)
        sigma = (hi - lo + 1) / 4.0
        draw = int(np.rint(rng.normal(mid, sigma)))
        chosen.add(min(hi, max(lo, draw)))
    assert len(chosen) == n_updates  # segments are disjoint
    return frozenset(chosen)
