"""Non-stationary labeled sample stream with scheduled abrupt covariate shifts.

Samples are drawn from a two-cluster Gaussian mixture (normal vs anomalous)
and then passed through the covariate transform of whichever regime is
active for the round. Regimes change only at scheduled shift rounds and
the transform acts on features alone, so the label's relation to the
pre-transform features never changes.

A stream can also be ingested from a CSV file of pre-extracted feature
vectors (one row per sample: feature columns, then a 0/1 label column).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

# Base mixture: normal cluster at the origin, anomalous cluster at a fixed
# offset, both isotropic with unit variance.
BASE_SIGMA = 1.0
ANOMALY_OFFSET_NORM = 3.0

# Covariate transform constants. The mean shift moves every feature along a
# fixed unit direction (total displacement below, in units of BASE_SIGMA);
# the scale factor is 1 + 0.05 * severity; the rotation acts on a fixed
# coordinate pair with an angle of 6 degrees per severity level.
MEAN_SHIFT_NORM = {3: 1.5, 5: 3.0}
SCALE_PER_SEVERITY = 0.05
ROTATION_DEG_PER_SEVERITY = 6.0
ROTATION_PAIR = (0, 1)

ALLOWED_SEVERITIES = (0, 3, 5)


class StreamFormatError(ValueError):
    """Raised when an ingested stream file cannot be parsed."""


class CorruptionKind(str, Enum):
    NONE = "none"
    SHIFT_MEAN = "shift_mean"
    SCALE = "scale"
    ROTATE_PAIR = "rotate_pair"


_ACTIVE_KINDS = (
    CorruptionKind.SHIFT_MEAN,
    CorruptionKind.SCALE,
    CorruptionKind.ROTATE_PAIR,
)


@dataclass(frozen=True)
class Regime:
    """A covariate-transform regime: corruption kind plus severity level.

    Severity 0 always canonicalizes to the identity regime, so two regimes
    compare equal exactly when they induce the same transform.
    """

    kind: CorruptionKind = CorruptionKind.NONE
    severity: int = 0

    def __post_init__(self) -> None:
        if self.severity not in ALLOWED_SEVERITIES:
            raise ValueError(f"severity must be one of {ALLOWED_SEVERITIES}, got {self.severity}")
        if self.severity == 0:
            object.__setattr__(self, "kind", CorruptionKind.NONE)
        elif self.kind == CorruptionKind.NONE:
            raise ValueError("a nonzero severity requires an active corruption kind")

    @property
    def is_identity(self) -> bool:
        return self.severity == 0


IDENTITY_REGIME = Regime()


@dataclass(frozen=True)
class ShiftEntry:
    round: int
    regime: Regime


@dataclass(frozen=True)
class ShiftSchedule:
    """Ground-truth sequence of accepted shifts, ordered by round."""

    entries: tuple[ShiftEntry, ...]
    n_rounds: int

    def __post_init__(self) -> None:
        rounds = [e.round for e in self.entries]
        if any(b <= a for a, b in zip(rounds, rounds[1:])):
            raise ValueError("shift rounds must be strictly increasing")
        regimes = [e.regime for e in self.entries]
        if any(a == b for a, b in zip([IDENTITY_REGIME] + regimes, regimes)):
            raise ValueError("consecutive shift entries must change the regime")

    @property
    def shift_rounds(self) -> tuple[int, ...]:
        return tuple(e.round for e in self.entries)

    def regime_at(self, round_index: int) -> Regime:
        """Regime active at a round: the last accepted shift at or before it."""
        active = IDENTITY_REGIME
        for entry in self.entries:
            if entry.round > round_index:
                break
            active = entry.regime
        return active

    def to_json_dict(self) -> dict:
        return {
            "n_rounds": self.n_rounds,
            "entries": [
                {"round": e.round, "kind": e.regime.kind.value, "severity": e.regime.severity}
                for e in self.entries
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ShiftSchedule":
        entries = tuple(
            ShiftEntry(int(e["round"]), Regime(CorruptionKind(e["kind"]), int(e["severity"])))
            for e in data["entries"]
        )
        return cls(entries=entries, n_rounds=int(data["n_rounds"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ShiftSchedule":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


EMPTY_SCHEDULE = ShiftSchedule(entries=(), n_rounds=0)


@dataclass(frozen=True, eq=False)
class Sample:
    features: np.ndarray
    label: int
    round: int
    index_in_batch: int


@dataclass(eq=False)
class Batch:
    round: int
    samples: list[Sample] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    @cached_property
    def feature_matrix(self) -> np.ndarray:
        return np.stack([s.features for s in self.samples])

    @cached_property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)


def build_schedule(
    n_rounds: int, shift_prob: float, min_gap: int, rng_seed: int
) -> ShiftSchedule:
    """Draw the ground-truth shift schedule.

    Each round independently proposes a candidate shift with probability
    ``shift_prob``. A candidate regime is drawn only when at least
    ``min_gap`` rounds have passed since the last accepted shift, and is
    accepted only if it differs from the currently active regime (so a
    severity-0 draw while severity 0 is active changes nothing and is
    dropped). Accepted regimes persist until the next accepted shift.

    Draw order per round, for reproducibility: one uniform for the
    candidate coin; if eligible, one integer for the severity; one integer
    for the kind only when the severity is nonzero.
    """
    if n_rounds < 1 or not 0.0 <= shift_prob <= 1.0 or min_gap < 1:
        return ShiftSchedule(entries=(), n_rounds=max(n_rounds, 0))
    rng = np.random.default_rng(rng_seed)
    entries: list[ShiftEntry] = []
    current = IDENTITY_REGIME
    last_accepted: int | None = None
    for round_index in range(1, n_rounds + 1):
        if rng.random() >= shift_prob:
            continue
        if last_accepted is not None and round_index - last_accepted < min_gap:
            continue
        severity = ALLOWED_SEVERITIES[rng.integers(len(ALLOWED_SEVERITIES))]
        if severity == 0:
            candidate = IDENTITY_REGIME
        else:
            kind = _ACTIVE_KINDS[rng.integers(len(_ACTIVE_KINDS))]
            candidate = Regime(kind, severity)
        if candidate == current:
            continue
        entries.append(ShiftEntry(round_index, candidate))
        current = candidate
        last_accepted = round_index
    return ShiftSchedule(entries=tuple(entries), n_rounds=n_rounds)


def _mean_shift_direction(dim: int) -> np.ndarray:
    return np.full(dim, 1.0 / np.sqrt(dim))


def anomaly_mean(dim: int) -> np.ndarray:
    mu = np.zeros(dim)
    mu[0] = ANOMALY_OFFSET_NORM
    return mu


def apply_regime(features: np.ndarray, regime: Regime) -> np.ndarray:
    """Apply a regime's covariate transform to a (batch, dim) feature block.

    Severity 0 is the exact identity (the input array is returned as is).
    """
    if regime.is_identity:
        return features
    if regime.kind == CorruptionKind.SHIFT_MEAN:
        delta = MEAN_SHIFT_NORM[regime.severity] * BASE_SIGMA
        return features + delta * _mean_shift_direction(features.shape[1])
    if regime.kind == CorruptionKind.SCALE:
        return features * (1.0 + SCALE_PER_SEVERITY * regime.severity)
    if regime.kind == CorruptionKind.ROTATE_PAIR:
        theta = np.deg2rad(ROTATION_DEG_PER_SEVERITY * regime.severity)
        i, j = ROTATION_PAIR
        out = features.copy()
        out[:, i] = np.cos(theta) * features[:, i] - np.sin(theta) * features[:, j]
        out[:, j] = np.sin(theta) * features[:, i] + np.cos(theta) * features[:, j]
        return out
    raise ValueError(f"unknown corruption kind: {regime.kind}")


def base_mixture(
    rng: np.random.Generator, n: int, dim: int, anomaly_rate: float
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n samples from the base (unshifted) two-cluster mixture."""
    labels = (rng.random(n) < anomaly_rate).astype(np.int64)
    features = rng.standard_normal((n, dim)) * BASE_SIGMA
    features[labels == 1] += anomaly_mean(dim)
    return features, labels


def next_batch(
    schedule: ShiftSchedule,
    round_index: int,
    batch_size: int,
    anomaly_rate: float,
    rng: np.random.Generator,
    dim: int = 16,
) -> Batch:
    """Draw one batch under the regime active at ``round_index``.

    Labels are Bernoulli(anomaly_rate) per sample; the covariate transform
    is applied to the drawn features only, after labels are fixed.
    """
    features, labels = base_mixture(rng, batch_size, dim, anomaly_rate)
    features = apply_regime(features, schedule.regime_at(round_index))
    samples = [
        Sample(features=features[j], label=int(labels[j]), round=round_index, index_in_batch=j)
        for j in range(batch_size)
    ]
    return Batch(round=round_index, samples=samples)


class SyntheticStream:
    """Round-addressable stream generator.

    Each round uses its own deterministic substream derived from
    (seed, round), so batch i is reproducible independently of access
    order and identical across runs that share the seed.
    """

    def __init__(
        self,
        schedule: ShiftSchedule,
        seed: int,
        batch_size: int,
        anomaly_rate: float,
        dim: int = 16,
    ) -> None:
        self.schedule = schedule
        self.seed = seed
        self.batch_size = batch_size
        self.anomaly_rate = anomaly_rate
        self.dim = dim

    def batch(self, round_index: int) -> Batch:
        rng = np.random.default_rng([self.seed, round_index])
        return next_batch(
            self.schedule, round_index, self.batch_size, self.anomaly_rate, rng, self.dim
        )


def bootstrap_dataset(
    n_normal: int, n_anomalous: int, dim: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Small labeled warm-start set drawn from the base mixture clusters."""
    normal = rng.standard_normal((n_normal, dim)) * BASE_SIGMA
    anomalous = rng.standard_normal((n_anomalous, dim)) * BASE_SIGMA + anomaly_mean(dim)
    features = np.concatenate([normal, anomalous])
    labels = np.concatenate(
        [np.zeros(n_normal, dtype=np.int64), np.ones(n_anomalous, dtype=np.int64)]
    )
    return features, labels


def _parse_row(cells: Sequence[str], row_number: int) -> tuple[list[float], int]:
    try:
        values = [float(c) for c in cells]
    except ValueError as exc:
        raise StreamFormatError(f"row {row_number}: non-numeric value ({exc})") from None
    label = values[-1]
    if label not in (0.0, 1.0):
        raise StreamFormatError(f"row {row_number}: label must be 0 or 1, got {label!r}")
    return values[:-1], int(label)


def ingest_stream(path: str | Path, batch_size: int) -> Iterator[Batch]:
    """Yield batches from a CSV of samples (features..., label).

    An optional header row is skipped. Batches come out in file order;
    the final batch may be short.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    path = Path(path)
    dim: int | None = None
    pending: list[Sample] = []
    round_index = 1
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        for row_number, cells in enumerate(reader, start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            if row_number == 1:
                try:
                    float(cells[0])
                except ValueError:
                    continue  # header row
            if len(cells) < 2:
                raise StreamFormatError(f"row {row_number}: need at least one feature and a label")
            features, label = _parse_row(cells, row_number)
            if dim is None:
                dim = len(features)
            elif len(features) != dim:
                raise StreamFormatError(
                    f"row {row_number}: expected {dim} feature columns, got {len(features)}"
                )
            pending.append(
                Sample(
                    features=np.asarray(features, dtype=np.float64),
                    label=label,
                    round=round_index,
                    index_in_batch=len(pending),
                )
            )
            if len(pending) == batch_size:
                yield Batch(round=round_index, samples=pending)
                round_index += 1
                pending = []
    if pending:
        yield Batch(round=round_index, samples=pending)
