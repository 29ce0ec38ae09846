"""Device/server simulator for shift-aware anomaly-detection model updating."""

from .device import DeviceState, UplinkPayload, device_round, install_model, select_samples
from .experiment import ExperimentConfig, RunResult, compare, nulltest, run_policy
from .metrics import macro_f1, match_detections, online_f1
from .model import ModelParams, TrainConfig, TrainingFailureError, focal_loss, predict
from .server import PolicyKind, ReplayBuffer, ServerState, UpdatePolicy, process_round
from .shiftdetect import (
    KernelMeanScorer,
    MahalanobisScorer,
    ShiftTestConfig,
    ShiftVerdict,
    ecdf,
    fit_scorer,
    permutation_test,
    t_l2,
)
from .stream import (
    Batch,
    CorruptionKind,
    Regime,
    Sample,
    ShiftSchedule,
    SyntheticStream,
    build_schedule,
    ingest_stream,
)

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "CorruptionKind",
    "DeviceState",
    "ExperimentConfig",
    "KernelMeanScorer",
    "MahalanobisScorer",
    "ModelParams",
    "PolicyKind",
    "Regime",
    "ReplayBuffer",
    "RunResult",
    "Sample",
    "ServerState",
    "ShiftSchedule",
    "ShiftTestConfig",
    "ShiftVerdict",
    "SyntheticStream",
    "TrainConfig",
    "TrainingFailureError",
    "UpdatePolicy",
    "UplinkPayload",
    "build_schedule",
    "compare",
    "device_round",
    "ecdf",
    "fit_scorer",
    "focal_loss",
    "ingest_stream",
    "install_model",
    "macro_f1",
    "match_detections",
    "nulltest",
    "online_f1",
    "permutation_test",
    "predict",
    "process_round",
    "run_policy",
    "select_samples",
    "t_l2",
    "__version__",
]
