"""Command-line experiment runner.

Subcommands: ``run`` (one policy), ``compare`` (multi-policy on a shared
stream), ``nulltest`` (detector size calibration), ``validate-trace``
(post-run trace checks). Configuration comes from an optional JSON file
(``--config``) with individual flags taking precedence; the default output
directory can be set with the OCLADS_OUT_DIR environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .experiment import (
    POLICY_NAMES,
    ExperimentConfig,
    compare,
    nulltest,
    run_to_dir,
    validate_trace,
    write_json,
)

_CONFIG_FLAGS = {
    # flag dest -> config field
    "rounds": "n_rounds",
    "batch_size": "batch_size",
    "anomaly_rate": "anomaly_rate",
    "shift_prob": "shift_prob",
    "alpha": "alpha",
    "permutations": "n_permutations",
    "learning_rate": "learning_rate",
    "scorer": "scorer_variant",
    "random_budget": "random_budget",
    "seed_stream": "stream_seed",
    "seed_schedule": "schedule_seed",
    "seed_model": "model_seed",
    "seed_detector": "detector_seed",
}


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, help="JSON config file; flags override it")
    sub.add_argument("--rounds", type=int, help="number of stream rounds")
    sub.add_argument("--batch-size", type=int, dest="batch_size")
    sub.add_argument("--anomaly-rate", type=float, dest="anomaly_rate")
    sub.add_argument("--shift-prob", type=float, dest="shift_prob")
    sub.add_argument("--alpha", type=float, help="shift-test significance level")
    sub.add_argument("--permutations", type=int, help="permutations per shift test")
    sub.add_argument("--learning-rate", type=float, dest="learning_rate")
    sub.add_argument("--scorer", choices=("kernel_mean", "mahalanobis"))
    sub.add_argument("--random-budget", type=int, dest="random_budget",
                     help="update budget for random_update (otherwise paired to oclads)")
    sub.add_argument("--seed-stream", type=int, dest="seed_stream")
    sub.add_argument("--seed-schedule", type=int, dest="seed_schedule")
    sub.add_argument("--seed-model", type=int, dest="seed_model")
    sub.add_argument("--seed-detector", type=int, dest="seed_detector")


def _add_out_dir(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--out-dir",
        type=Path,
        default=Path(os.environ.get("OCLADS_OUT_DIR", "runs")),
        help="artifact directory (default: $OCLADS_OUT_DIR or ./runs)",
    )


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    if getattr(args, "config", None) is not None:
        data = json.loads(args.config.read_text())
    for dest, key in _CONFIG_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            data[key] = value
    if getattr(args, "policies", None):
        data["policies"] = tuple(args.policies.split(","))
    return ExperimentConfig.from_dict(data)


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    result = run_to_dir(cfg, args.policy, args.out_dir, ingest=args.ingest)
    json.dump(result.summary, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    results = compare(cfg, args.out_dir)
    header = f"{'policy':<16} {'final_online_f1':>16} {'updates':>8} {'post_cal':>9}"
    print(header)
    print("-" * len(header))
    for name in cfg.policies:
        s = results[name].summary
        print(
            f"{name:<16} {s['final_online_f1']:>16.4f} "
            f"{s['total_updates']:>8} {s['post_calibration_updates']:>9}"
        )
    print(f"\nartifacts written to {args.out_dir}")
    return 0


def _cmd_nulltest(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    report = nulltest(cfg, n_trials=args.trials)
    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        write_json(report, args.out_dir / "nulltest.json")
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    status = 0
    for path in args.traces:
        problems = validate_trace(path)
        if problems:
            status = 1
            for problem in problems:
                print(f"{path}: {problem}", file=sys.stderr)
        else:
            print(f"{path}: ok")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oclads",
        description="Shift-aware device/server anomaly-detection update simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single policy")
    p_run.add_argument("--policy", choices=POLICY_NAMES, default="oclads")
    p_run.add_argument("--ingest", type=Path, help="CSV stream (features..., label) to replay")
    _add_config_flags(p_run)
    _add_out_dir(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run several policies on one stream")
    p_cmp.add_argument("--policies", help=f"comma-separated subset of {','.join(POLICY_NAMES)}")
    _add_config_flags(p_cmp)
    _add_out_dir(p_cmp)
    p_cmp.set_defaults(func=_cmd_compare)

    p_null = sub.add_parser("nulltest", help="measure the detector's false-alarm rate")
    p_null.add_argument("--trials", type=int, default=1000)
    _add_config_flags(p_null)
    _add_out_dir(p_null)
    p_null.set_defaults(func=_cmd_nulltest)

    p_val = sub.add_parser("validate-trace", help="check trace CSVs against the row contract")
    p_val.add_argument("traces", nargs="+", type=Path)
    p_val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
