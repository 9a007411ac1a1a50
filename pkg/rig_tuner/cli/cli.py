"""
rig-tuner command line.

    rig-tuner repro table1 fig7 --out results/
    rig-tuner calibrate --config calibrate.json --out calibrated/
    rig-tuner finetune --config finetune.json --tracker "subprocess:./my_tracker"

Every command writes its artifacts under --out together with manifest.json.
Exit code 0 on success, 1 when a repro threshold fails, 2 on invalid input
or a tracker failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from contextlib import closing, nullcontext
from dataclasses import replace
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
from undo_stack import UndoStack

from rig_tuner.calibration import (
    ExpressionIO,
    ExpressionPair,
    ExpressionSetEditor,
    augment_pair,
    fit_residuals,
    fit_rig_params,
)
from rig_tuner.core import FineTuner, run_pipeline
from rig_tuner.repro import REPRO_TARGETS, ReproSettings, run_target
from rig_tuner.rigs import Rig, RigIO
from rig_tuner.trackers import SubprocessTracker, Tracker
from rig_tuner.utils import connect_all_signals_to_logger
from rig_tuner.utils.errors import RigTunerError
from rig_tuner.utils.file_access import write_json

from .experiment_config import ExperimentConfig

EXIT_OK = 0
EXIT_THRESHOLD_FAILURE = 1
EXIT_ERROR = 2

DEFAULT_OUT = Path("rig_tuner_out")


def _package_version() -> str:
    try:
        return version("rig-tuner")
    except PackageNotFoundError:
        return "unknown"


def _common_arguments() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--out", type=Path, default=None, help="Output directory")
    parser.add_argument("--seed", type=int, default=None, help="Seed of every random draw")
    parser.add_argument("--jobs", type=int, default=None, help="Worker threads")
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level",
    )
    return parser


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    common = _common_arguments()
    parser = argparse.ArgumentParser(
        prog="rig-tuner",
        description="Fine-tune the rig parameters used by a black-box tracker",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=_package_version())
    commands = parser.add_subparsers(dest="command", required=True)

    repro = commands.add_parser(
        "repro", parents=[common], help="Reproduce the embedded linear experiments"
    )
    repro.add_argument(
        "targets",
        nargs="+",
        choices=[*REPRO_TARGETS, "all"],
        help="Tables and figures to reproduce",
    )
    repro.add_argument(
        "--quality-window",
        type=int,
        default=ReproSettings.quality_window,
        help="Iterations averaged for the dv_hat/dtheta quality columns",
    )

    for name, text in (
        ("calibrate", "Fit the animation rig to expression pairs"),
        ("finetune", "Run the staged fine-tuning pipeline"),
    ):
        command = commands.add_parser(name, parents=[common], help=text)
        command.add_argument("--config", type=Path, required=True, help="Experiment JSON")
        command.add_argument(
            "--tracker",
            default=None,
            help="'builtin' or 'subprocess:CMD', overrides the config",
        )
    return parser.parse_args(argv)


def _write_manifest(out: Path, content: dict) -> Path:
    artifacts = sorted(
        p.relative_to(out).as_posix()
        for p in out.rglob("*")
        if p.is_file() and p.name != "manifest.json"
    )
    return write_json(
        out / "manifest.json", {"version": _package_version(), **content, "artifacts": artifacts}
    )


def cmd_repro(targets: Sequence[str], out: Path, settings: ReproSettings) -> int:
    if "all" in targets:
        targets = list(REPRO_TARGETS)
    results = []
    for target in dict.fromkeys(targets):
        result = run_target(target, settings)
        result.write(out / target)
        results.append(result)
        status = "passed" if result.passed else "FAILED"
        sys.stdout.write(f"{target}: {status}\n")
        for failure in result.failures:
            sys.stdout.write(f"  {failure.describe()}\n")

    _write_manifest(
        out,
        {
            "command": "repro",
            "seed": settings.seed,
            "jobs": settings.jobs,
            "quality_window": settings.quality_window,
            "results": [result.to_dict() for result in results],
        },
    )
    return EXIT_OK if all(r.passed for r in results) else EXIT_THRESHOLD_FAILURE


def _edited_pairs(config: ExperimentConfig, rig: Rig) -> list[ExpressionPair]:
    pairs = config.load_pairs(rig)
    if not config.activation_overrides:
        return pairs
    editor = ExpressionSetEditor(pairs, rig.control_names, UndoStack())
    connect_all_signals_to_logger(editor)
    editor.apply_overrides(config.activation_overrides)
    return editor.pairs


def _tracker_scope(tracker: Tracker):
    if isinstance(tracker, SubprocessTracker):
        return closing(tracker)
    return nullcontext(tracker)


def cmd_calibrate(config: ExperimentConfig, out: Path) -> int:
    """
    Augments the captured pairs with the tracker's output on their geometry,
    then fits theta_R. Writes calibrated_rig.json, the augmented expression
    set and calibration_report.json.
    """
    rig = config.load_rig()
    pairs = _edited_pairs(config, rig)

    augmented = []
    if config.augment:
        tracker = config.make_tracker(rig)
        with _tracker_scope(tracker):
            for i, pair in enumerate(pairs):
                if not pair.is_captured:
                    continue
                pairs[i] = augment_pair(pair, tracker.track(pair.v, rig.theta))
                if not np.array_equal(pairs[i].c, pair.c):
                    augmented.append(pair.name)

    theta = fit_rig_params(rig, pairs, config.calibration)
    residuals = fit_residuals(rig, pairs, theta)
    calibrated = rig.with_theta(theta)
    RigIO.save_rig(calibrated, out / "calibrated_rig.json")
    ExpressionIO.save_pairs(pairs, rig.control_names, out / "augmented_expressions.json")
    write_json(
        out / "calibration_report.json",
        {
            "residuals": residuals,
            "augmented": augmented,
            "masked": {
                pair.name: pair.geometry_mask.tolist()
                for pair in pairs
                if pair.geometry_mask is not None
            },
        },
    )
    logging.info("Calibrated %d pairs, %d augmented", len(pairs), len(augmented))
    _write_manifest(out, {"command": "calibrate", "config": config.to_dict()})
    return EXIT_OK


def cmd_finetune(config: ExperimentConfig, out: Path) -> int:
    """
    Runs the configured pipeline from theta_init and writes tuned_rig.json,
    the per-stage summary and every optimization's trace and trajectory.
    """
    rig = config.load_rig()
    pairs = _edited_pairs(config, rig)
    theta_init = config.load_theta_init(rig)
    pipeline = config.pipeline

    tracker = config.make_tracker(rig)
    with _tracker_scope(tracker):
        tuner = FineTuner(pipeline.optimizer, pipeline.diff, jobs=pipeline.jobs)
        connect_all_signals_to_logger(tuner)
        report = run_pipeline(pipeline, pairs, theta_init, tracker, rig, tuner)

    RigIO.save_rig(rig.with_theta(report.theta_final), out / "tuned_rig.json")
    report.write_summary_csv(out / "stage_summary.csv")
    write_json(out / "pipeline_report.json", report.to_dict())
    for result in report.stages:
        stage_dir = out / result.stage_id.value
        for i, optimization in enumerate(result.reports):
            optimization.write_trace_csv(stage_dir / f"unit_{i:03d}_trace.csv")
            optimization.write_trajectory_csv(stage_dir / f"unit_{i:03d}_trajectory.csv")

    _write_manifest(out, {"command": "finetune", "config": config.to_dict()})
    return EXIT_OK


def _configured(args: argparse.Namespace) -> ExperimentConfig:
    """Config file with the command-line overrides applied."""
    config = ExperimentConfig.load(args.config)
    if args.tracker is not None:
        config = config.replace(tracker=args.tracker)
    if args.seed is not None:
        config = config.replace(seed=args.seed)

    pipeline = config.pipeline
    pipeline.optimizer = replace(pipeline.optimizer, seed=config.seed)
    pipeline.diff.directions = replace(pipeline.diff.directions, seed=config.seed)
    if args.jobs is not None:
        pipeline.jobs = args.jobs
    return config


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        if args.command == "repro":
            settings = ReproSettings(
                seed=0 if args.seed is None else args.seed,
                jobs=1 if args.jobs is None else args.jobs,
                quality_window=args.quality_window,
            )
            return cmd_repro(args.targets, args.out or DEFAULT_OUT, settings)

        config = _configured(args)
        out = args.out or config.out or DEFAULT_OUT
        if args.command == "calibrate":
            return cmd_calibrate(config, out)
        return cmd_finetune(config, out)
    except RigTunerError as e:
        logging.error("%s", e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
