"""Experiment orchestration: seeded runs, policy comparisons, artifact IO.

A run wires the pieces together round by round: draw a batch, let the device
infer and select its uplink, let the server test/store/train/decide, install
any downlink, and score the round. Everything is driven by named seed
streams (stream, schedule, model, detector) so reruns are byte-identical
and ablations can vary one randomness source at a time.

Artifacts per run: a per-round trace CSV and a summary JSON; ``compare``
additionally writes the shift schedule and a cross-policy report. Floats go
through repr() so the files round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .device import DeviceState, device_round, install_model
from .metrics import macro_f1, match_detections
from .model import TrainConfig, bootstrap_finetune, init_params
from .server import (
    PolicyKind,
    ReplayBuffer,
    ServerState,
    UpdatePolicy,
    make_random_schedule,
    process_round,
)
from .shiftdetect import ShiftTestConfig, fit_scorer, permutation_test
from .stream import (
    Batch,
    ShiftSchedule,
    SyntheticStream,
    base_mixture,
    bootstrap_dataset,
    build_schedule,
    ingest_stream,
)

POLICY_NAMES = ("oclads", "all_update", "random_update", "oracle", "no_update")

TRACE_COLUMNS = (
    "round",
    "policy",
    "k_i",
    "buffer_size",
    "testable",
    "p_value",
    "detected",
    "transmitted",
    "batch_f1",
    "online_f1",
)


@dataclass(frozen=True)
class ExperimentConfig:
    n_rounds: int = 400
    batch_size: int = 64
    anomaly_rate: float = 0.07
    shift_prob: float = 0.15
    min_gap: int = 5
    calibration_rounds: int = 10
    s_threshold: float = 0.25
    k_min: int = 15
    alpha: float = 0.05
    n_permutations: int = 199
    buffer_capacity: int = 3000
    feature_dim: int = 16
    hidden_dim: int = 32
    learning_rate: float = 0.02
    steps_per_batch: int = 20
    minibatch_size: int = 32
    gamma_fl: float = 2.0
    alpha_fl: float = 0.8
    bootstrap_normal: int = 100
    bootstrap_anomalous: int = 20
    bootstrap_steps: int = 300
    scorer_variant: str = "kernel_mean"
    detection_window: int = 0
    f1_include_absent: bool = True
    detect_all_policies: bool = False
    random_budget: int | None = None
    stream_seed: int = 1
    schedule_seed: int = 2
    model_seed: int = 3
    detector_seed: int = 4
    policies: tuple[str, ...] = POLICY_NAMES

    def __post_init__(self) -> None:
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        for name in self.policies:
            if name not in POLICY_NAMES:
                raise ValueError(f"unknown policy {name!r}; choose from {POLICY_NAMES}")

    def train_config(self, steps: int | None = None) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            steps_per_batch=self.steps_per_batch if steps is None else steps,
            minibatch_size=self.minibatch_size,
            gamma_fl=self.gamma_fl,
            alpha_fl=self.alpha_fl,
        )

    def to_dict(self) -> dict:
        data = asdict(self)
        data["policies"] = list(self.policies)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        if "policies" in data:
            data = dict(data, policies=tuple(data["policies"]))
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TraceRow:
    round: int
    policy: str
    k_i: int
    buffer_size: int
    testable: bool
    p_value: float | None
    detected: bool | None
    transmitted: bool
    batch_f1: float
    online_f1: float


@dataclass
class RunResult:
    policy: str
    rows: list[TraceRow]
    summary: dict
    online_f1_curve: list[float] = field(repr=False, default_factory=list)


def _make_policy(name: str, cfg: ExperimentConfig, schedule: ShiftSchedule, budget: int | None):
    if name == "oclads":
        return UpdatePolicy.oclads()
    if name == "all_update":
        return UpdatePolicy.all_update()
    if name == "no_update":
        return UpdatePolicy.no_update()
    if name == "oracle":
        return UpdatePolicy.oracle(schedule.shift_rounds)
    if name == "random_update":
        if budget is None:
            raise ValueError("random_update needs an update budget (paired to an oclads run)")
        rng = np.random.default_rng([cfg.schedule_seed, 1])
        return UpdatePolicy.random_update(
            make_random_schedule(cfg.n_rounds, budget, cfg.calibration_rounds, rng)
        )
    raise ValueError(f"unknown policy {name!r}")


def _initial_model(cfg: ExperimentConfig, dim: int):
    """Bootstrap-finetuned starting parameters, shared by every policy."""
    model_rng = np.random.default_rng([cfg.model_seed, 0])
    params = init_params(dim, cfg.hidden_dim, model_rng)
    data_rng = np.random.default_rng([cfg.stream_seed, 0])
    feats, labels = bootstrap_dataset(cfg.bootstrap_normal, cfg.bootstrap_anomalous, dim, data_rng)
    return bootstrap_finetune(params, feats, labels, cfg.train_config(cfg.bootstrap_steps), model_rng)


def _run_loop(
    cfg: ExperimentConfig,
    policy_name: str,
    policy: UpdatePolicy,
    schedule: ShiftSchedule,
    batches: Iterable[Batch],
    dim: int,
) -> RunResult:
    params = _initial_model(cfg, dim)
    device = DeviceState(
        installed_model=params,
        calibration_rounds=cfg.calibration_rounds,
        s_threshold=cfg.s_threshold,
        k_min=cfg.k_min,
    )
    server = ServerState(
        master_model=params,
        policy=policy,
        buffer=ReplayBuffer(cfg.buffer_capacity),
        detector_cfg=ShiftTestConfig(cfg.alpha, cfg.n_permutations, cfg.detector_seed),
        train_cfg=cfg.train_config(),
        calibration_rounds=cfg.calibration_rounds,
        scorer_variant=cfg.scorer_variant,
        model_seed=cfg.model_seed,
        detector_seed=cfg.detector_seed,
        run_detector=(policy.kind == PolicyKind.OCLADS) or cfg.detect_all_policies,
    )

    rows: list[TraceRow] = []
    curve: list[float] = []
    detections: list[tuple[int, bool]] = []
    f1_sum = 0.0
    n_rounds = 0
    total_updates = 0
    warmup_updates = 0

    for batch in batches:
        n_rounds += 1
        predictions, _, payload = device_round(device, batch)
        outcome = process_round(server, payload)
        if outcome.downlink is not None:
            install_model(device, outcome.downlink)
            total_updates += 1
            if batch.round <= cfg.calibration_rounds:
                warmup_updates += 1
        if outcome.verdict is not None:
            detections.append((batch.round, outcome.verdict.shift_detected))
        batch_f1 = macro_f1(batch.labels, predictions, cfg.f1_include_absent)
        f1_sum += batch_f1
        online = f1_sum / n_rounds
        curve.append(online)
        rows.append(
            TraceRow(
                round=batch.round,
                policy=policy_name,
                k_i=len(payload),
                buffer_size=outcome.buffer_size,
                testable=outcome.testable,
                p_value=None if outcome.verdict is None else outcome.verdict.p_value,
                detected=None if outcome.verdict is None else outcome.verdict.shift_detected,
                transmitted=outcome.transmitted,
                batch_f1=batch_f1,
                online_f1=online,
            )
        )

    matching = match_detections(detections, schedule, cfg.detection_window)
    post_cal_shifts = sum(1 for r in schedule.shift_rounds if r > cfg.calibration_rounds)
    summary = {
        "policy": policy_name,
        "total_rounds": n_rounds,
        "total_updates": total_updates,
        "warmup_updates": warmup_updates,
        "post_calibration_updates": total_updates - warmup_updates,
        "true_shifts": len(schedule.shift_rounds),
        "post_calibration_true_shifts": post_cal_shifts,
        "tested_rounds": len(detections),
        "detections": sum(1 for _, flag in detections if flag),
        "true_detections": matching.true_detections,
        "false_alarms": matching.false_alarms,
        "missed_shifts": matching.missed_shifts,
        "final_online_f1": curve[-1] if curve else None,
        "seeds": {
            "stream": cfg.stream_seed,
            "schedule": cfg.schedule_seed,
            "model": cfg.model_seed,
            "detector": cfg.detector_seed,
        },
    }
    return RunResult(policy=policy_name, rows=rows, summary=summary, online_f1_curve=curve)


def run_policy(
    cfg: ExperimentConfig,
    policy_name: str,
    schedule: ShiftSchedule | None = None,
    budget: int | None = None,
) -> RunResult:
    """Run one policy over the synthetic stream and return its trace/summary."""
    if schedule is None:
        schedule = build_schedule(cfg.n_rounds, cfg.shift_prob, cfg.min_gap, cfg.schedule_seed)
    if policy_name == "random_update" and budget is None:
        budget = cfg.random_budget
        if budget is None:
            oclads = run_policy(cfg, "oclads", schedule)
            budget = oclads.summary["post_calibration_updates"]
    policy = _make_policy(policy_name, cfg, schedule, budget)
    stream = SyntheticStream(
        schedule, cfg.stream_seed, cfg.batch_size, cfg.anomaly_rate, cfg.feature_dim
    )
    batches = (stream.batch(i) for i in range(1, cfg.n_rounds + 1))
    return _run_loop(cfg, policy_name, policy, schedule, batches, cfg.feature_dim)


def run_ingested(cfg: ExperimentConfig, policy_name: str, path: str | Path) -> RunResult:
    """Run one policy over a CSV feature stream instead of the generator."""
    if policy_name == "oracle":
        raise ValueError("oracle policy needs a known shift schedule; not available for ingested streams")
    first_batches = list(ingest_stream(path, cfg.batch_size))
    if not first_batches:
        raise ValueError(f"{path}: no samples found")
    dim = first_batches[0].feature_matrix.shape[1]
    schedule = ShiftSchedule(entries=(), n_rounds=len(first_batches))
    budget = cfg.random_budget
    if policy_name == "random_update" and budget is None:
        raise ValueError("random_update on an ingested stream needs --random-budget")
    cfg = replace(cfg, n_rounds=len(first_batches))
    policy = _make_policy(policy_name, cfg, schedule, budget)
    return _run_loop(cfg, policy_name, policy, schedule, first_batches, dim)


# ---------------------------------------------------------------------------
# artifact IO


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trace(rows: Sequence[TraceRow], path: str | Path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        for row in rows:
            writer.writerow([_cell(getattr(row, col)) for col in TRACE_COLUMNS])


def write_json(data: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def run_to_dir(cfg: ExperimentConfig, policy_name: str, out_dir: str | Path,
               ingest: str | Path | None = None) -> RunResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if ingest is not None:
        result = run_ingested(cfg, policy_name, ingest)
    else:
        schedule = build_schedule(cfg.n_rounds, cfg.shift_prob, cfg.min_gap, cfg.schedule_seed)
        schedule.save(out / "schedule.json")
        result = run_policy(cfg, policy_name, schedule)
    write_trace(result.rows, out / f"trace_{policy_name}.csv")
    write_json(result.summary, out / f"summary_{policy_name}.json")
    return result


def compare(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict[str, RunResult]:
    """Run the configured policies on one shared stream.

    The oclads run always goes first so its post-calibration update count can
    size the random_update schedule (the two report equal update totals).
    """
    if len(cfg.policies) < 2:
        raise ValueError("compare needs at least 2 policies")
    schedule = build_schedule(cfg.n_rounds, cfg.shift_prob, cfg.min_gap, cfg.schedule_seed)
    results: dict[str, RunResult] = {}

    oclads_result = None
    if "oclads" in cfg.policies or "random_update" in cfg.policies:
        oclads_result = run_policy(cfg, "oclads", schedule)
        if "oclads" in cfg.policies:
            results["oclads"] = oclads_result
    budget = None if oclads_result is None else oclads_result.summary["post_calibration_updates"]

    for name in cfg.policies:
        if name in results:
            continue
        results[name] = run_policy(cfg, name, schedule, budget=budget)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        schedule.save(out / "schedule.json")
        report = {
            "n_rounds": cfg.n_rounds,
            "true_shifts": len(schedule.shift_rounds),
            "policies": list(cfg.policies),
            "final_online_f1": {n: results[n].summary["final_online_f1"] for n in cfg.policies},
            "total_updates": {n: results[n].summary["total_updates"] for n in cfg.policies},
            "post_calibration_updates": {
                n: results[n].summary["post_calibration_updates"] for n in cfg.policies
            },
            "online_f1": {n: results[n].online_f1_curve for n in cfg.policies},
        }
        for name in cfg.policies:
            write_trace(results[name].rows, out / f"trace_{name}.csv")
            write_json(results[name].summary, out / f"summary_{name}.json")
        write_json(report, out / "comparison.json")
    return results


def nulltest(cfg: ExperimentConfig, n_trials: int = 1000, train_size: int = 200) -> dict:
    """Empirical size of the shift test on same-distribution batch pairs."""
    if n_trials < 100:
        raise ValueError("n_trials must be >= 100")
    test_cfg = ShiftTestConfig(cfg.alpha, cfg.n_permutations, cfg.detector_seed)
    rejections = 0
    for trial in range(n_trials):
        rng = np.random.default_rng([cfg.detector_seed, 3, trial])
        train, _ = base_mixture(rng, train_size, cfg.feature_dim, cfg.anomaly_rate)
        cal, _ = base_mixture(rng, cfg.batch_size, cfg.feature_dim, cfg.anomaly_rate)
        test, _ = base_mixture(rng, cfg.batch_size, cfg.feature_dim, cfg.anomaly_rate)
        scorer = fit_scorer(train, cfg.scorer_variant)
        verdict = permutation_test(scorer, cal, test, test_cfg, rng)
        rejections += verdict.shift_detected
    rate = rejections / n_trials
    z = 1.959963984540054  # two-sided 95% normal quantile
    denom = 1.0 + z * z / n_trials
    center = (rate + z * z / (2 * n_trials)) / denom
    half = z * np.sqrt(rate * (1.0 - rate) / n_trials + z * z / (4 * n_trials**2)) / denom
    return {
        "alpha": cfg.alpha,
        "n_permutations": cfg.n_permutations,
        "n_trials": n_trials,
        "rejections": rejections,
        "rejection_rate": rate,
        "ci95_low": float(max(0.0, center - half)),
        "ci95_high": float(min(1.0, center + half)),
    }


# ---------------------------------------------------------------------------
# trace validation


def _parse_cell(text: str, kind: str):
    if text == "":
        return None
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    if kind == "bool":
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r}")
        return text == "true"
    return text


_COLUMN_KINDS = {
    "round": "int",
    "policy": "str",
    "k_i": "int",
    "buffer_size": "int",
    "testable": "bool",
    "p_value": "float",
    "detected": "bool",
    "transmitted": "bool",
    "batch_f1": "float",
    "online_f1": "float",
}


def validate_trace(path: str | Path) -> list[str]:
    """Check a trace CSV against the per-row contract; return problem strings."""
    problems: list[str] = []
    with Path(path).open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_COLUMNS:
            return [f"bad header: {header!r}"]
        f1_sum = 0.0
        prev_round = 0
        for line_no, cells in enumerate(reader, start=2):
            if len(cells) != len(TRACE_COLUMNS):
                problems.append(f"line {line_no}: expected {len(TRACE_COLUMNS)} cells")
                continue
            try:
                row = {
                    col: _parse_cell(text, _COLUMN_KINDS[col])
                    for col, text in zip(TRACE_COLUMNS, cells)
                }
            except ValueError as exc:
                problems.append(f"line {line_no}: {exc}")
                continue
            if row["round"] != prev_round + 1:
                problems.append(f"line {line_no}: round {row['round']} after {prev_round}")
            prev_round = row["round"] if row["round"] is not None else prev_round
            for col in ("batch_f1", "online_f1"):
                if row[col] is None or not 0.0 <= row[col] <= 1.0:
                    problems.append(f"line {line_no}: {col} out of [0,1]")
            if row["k_i"] is None or row["k_i"] < 0:
                problems.append(f"line {line_no}: bad k_i")
            if row["detected"] and not row["testable"]:
                problems.append(f"line {line_no}: detected without testable")
            if (row["p_value"] is None) != (row["detected"] is None):
                problems.append(f"line {line_no}: p_value/detected presence mismatch")
            if row["batch_f1"] is not None and row["online_f1"] is not None:
                f1_sum += row["batch_f1"]
                expected = f1_sum / row["round"]
                if abs(row["online_f1"] - expected) > 1e-12:
                    problems.append(
                        f"line {line_no}: online_f1 {row['online_f1']!r} != prefix mean {expected!r}"
                    )
    return problems
