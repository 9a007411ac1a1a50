from __future__ import annotations

import csv
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rig_tuner.calibration import ExpressionPair
from rig_tuner.objectives import ObjectiveConfig
from rig_tuner.rigs import Rig, RigParams
from rig_tuner.trackers import FilterMask, Tracker
from rig_tuner.utils.errors import PipelineConfigError, RigTunerError
from rig_tuner.utils.file_access import csv_cell, reject_unknown_fields

from .fine_tuner import FineTuner
from .optimizer_config import DiffConfig, OptimizerConfig
from .stages import DEFAULT_SERIALIZE_GROUPS, StageId, StageResult, default_stage, run_stage


class PipelineMode(Enum):
    OPEN_SOURCE = "open_source"
    BLACK_BOX = "black_box"


_DEFAULT_ORDERS = {
    PipelineMode.OPEN_SOURCE: [
        StageId.S1_DECIMATED,
        StageId.S2_FILTERED_PRIMARY,
        StageId.S3_SPURIOUS_SUPPRESSION,
        StageId.S4_SPURIOUS_COLUMNS,
    ],
    PipelineMode.BLACK_BOX: [
        StageId.S2_FILTERED_PRIMARY,
        StageId.S3_SPURIOUS_SUPPRESSION,
        StageId.S4_SPURIOUS_COLUMNS,
    ],
}


@dataclass
class PipelineConfig:
    """
    Staged fine-tuning. primary_controls and spurious_controls accept control
    indices or names; spurious_controls defaults to every non-primary control.
    stage_order defaults to S1..S4 in open_source mode and S2..S4 in
    black_box mode.
    """

    mode: PipelineMode = PipelineMode.OPEN_SOURCE
    stage_order: list[StageId] | None = None
    primary_controls: list[int | str] = field(default_factory=list)
    spurious_controls: list[int | str] | None = None
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    diff: DiffConfig = field(default_factory=DiffConfig)
    spurious_weight: float = 1.0
    jobs: int = 1
    serialize_groups: list[list[str]] = field(
        default_factory=lambda: [list(group) for group in DEFAULT_SERIALIZE_GROUPS]
    )

    def __post_init__(self):
        self.mode = PipelineMode(self.mode)
        if self.stage_order is not None:
            self.stage_order = [StageId(stage) for stage in self.stage_order]
        if self.jobs < 1:
            _error_msg = f"jobs must be at least 1, got {self.jobs}"
            raise PipelineConfigError(_error_msg)

    @property
    def stages(self) -> list[StageId]:
        if self.stage_order is None:
            return list(_DEFAULT_ORDERS[self.mode])
        return list(self.stage_order)

    def check(self, tracker: Tracker) -> PipelineConfig:
        stages = self.stages
        if len(set(stages)) != len(stages):
            _error_msg = f"Stage order repeats stages: {[s.value for s in stages]}"
            raise PipelineConfigError(_error_msg)
        if StageId.S1_DECIMATED in stages:
            if self.mode == PipelineMode.BLACK_BOX:
                _error_msg = "A black-box tracker cannot run the decimated stage"
                raise PipelineConfigError(_error_msg)
            if not tracker.capabilities.supports_decimation:
                _error_msg = "The decimated stage needs a tracker supporting decimation"
                raise PipelineConfigError(_error_msg)
        if stages and not self.primary_controls:
            _error_msg = "The pipeline needs at least one primary control"
            raise PipelineConfigError(_error_msg)
        return self

    def control_sets(self, rig: Rig) -> tuple[list[int], list[int]]:
        def resolve(controls: Sequence[int | str]) -> list[int]:
            return sorted(
                {rig.control_index(c) if isinstance(c, str) else int(c) for c in controls}
            )

        primary = resolve(self.primary_controls)
        if self.spurious_controls is None:
            spurious = sorted(set(range(rig.n_controls)) - set(primary))
        else:
            spurious = resolve(self.spurious_controls)
        return primary, spurious

    @classmethod
    def from_dict(cls, content: dict) -> PipelineConfig:
        reject_unknown_fields(cls, content)
        content = dict(content)
        if "objective" in content:
            content["objective"] = ObjectiveConfig.from_dict(content["objective"])
        if "optimizer" in content:
            content["optimizer"] = OptimizerConfig.from_dict(content["optimizer"])
        if "diff" in content:
            content["diff"] = DiffConfig.from_dict(content["diff"])
        return cls(**content)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "stage_order": None
            if self.stage_order is None
            else [stage.value for stage in self.stage_order],
            "primary_controls": list(self.primary_controls),
            "spurious_controls": None
            if self.spurious_controls is None
            else list(self.spurious_controls),
            "objective": self.objective.to_dict(),
            "optimizer": self.optimizer.to_dict(),
            "diff": self.diff.to_dict(),
            "spurious_weight": self.spurious_weight,
            "jobs": self.jobs,
            "serialize_groups": [list(group) for group in self.serialize_groups],
        }


@dataclass
class ExpressionErrors:
    """
    Full-tracker errors per expression: squared error on the expression's
    primary controls and summed absolute activation of spurious controls
    outside the expression.
    """

    names: list[str]
    primary: NDArray
    spurious: NDArray

    @property
    def primary_total(self) -> float:
        return float(self.primary.sum())

    @property
    def spurious_total(self) -> float:
        return float(self.spurious.sum())


def expression_errors(
    pairs: Sequence[ExpressionPair],
    tracker: Tracker,
    rig: Rig,
    theta: ArrayLike,
    primary: Sequence[int],
    spurious: Sequence[int],
) -> ExpressionErrors:
    primary_mask = FilterMask.from_indices(primary, rig.n_controls)
    spurious_mask = FilterMask.from_indices(spurious, rig.n_controls)
    primary_errors, spurious_sums = [], []
    for pair in pairs:
        own = FilterMask(pair.expression_controls())
        c = np.asarray(tracker.track(pair.v, theta), dtype=np.float64)
        residual = (own & primary_mask).apply(c - pair.c)
        primary_errors.append(float(residual @ residual))
        spurious_sums.append(float(np.abs((spurious_mask & own.complement()).apply(c)).sum()))
    return ExpressionErrors(
        names=[pair.name for pair in pairs],
        primary=np.array(primary_errors),
        spurious=np.array(spurious_sums),
    )


@dataclass
class StageSummary:
    stage_id: StageId
    before: ExpressionErrors
    after: ExpressionErrors


@dataclass
class PipelineReport:
    mode: PipelineMode
    theta_init: RigParams
    theta_final: RigParams
    initial: ExpressionErrors
    stages: list[StageResult] = field(default_factory=list)
    summaries: list[StageSummary] = field(default_factory=list)

    @property
    def final(self) -> ExpressionErrors:
        return self.summaries[-1].after if self.summaries else self.initial

    def write_summary_csv(self, path: str | Path) -> Path:
        """Before/after errors per stage and expression."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(
                [
                    "stage",
                    "expression",
                    "primary_before",
                    "primary_after",
                    "spurious_before",
                    "spurious_after",
                ]
            )
            for summary in self.summaries:
                before, after = summary.before, summary.after
                for i, name in enumerate(before.names):
                    writer.writerow(
                        [
                            summary.stage_id.value,
                            name,
                            csv_cell(before.primary[i]),
                            csv_cell(after.primary[i]),
                            csv_cell(before.spurious[i]),
                            csv_cell(after.spurious[i]),
                        ]
                    )
        return path

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "initial": {
                "primary": self.initial.primary_total,
                "spurious": self.initial.spurious_total,
            },
            "stages": [
                {
                    "stage": summary.stage_id.value,
                    "primary_before": summary.before.primary_total,
                    "primary_after": summary.after.primary_total,
                    "spurious_before": summary.before.spurious_total,
                    "spurious_after": summary.after.spurious_total,
                    "units": result.units,
                    "accepted": result.accepted.value,
                    "reports": [report.to_dict() for report in result.reports],
                }
                for summary, result in zip(self.summaries, self.stages, strict=True)
            ],
            "theta_final": self.theta_final.tolist(),
        }


def run_pipeline(
    config: PipelineConfig,
    pairs: Sequence[ExpressionPair],
    theta_init: ArrayLike,
    tracker: Tracker,
    rig: Rig,
    tuner: FineTuner | None = None,
) -> PipelineReport:
    """
    Run the configured stages in order, each starting from the previous
    stage's parameters. Every capability check happens before the first
    tracker call.
    """
    config.check(tracker)
    theta_init = rig.check_theta(theta_init).copy()
    primary, spurious = config.control_sets(rig)
    tuner = tuner or FineTuner(config.optimizer, config.diff, jobs=config.jobs)

    stages = []
    for stage_id in config.stages:
        stage = default_stage(
            stage_id, rig, primary, spurious, config.objective, config.spurious_weight
        )
        stage.serialize_groups = [list(group) for group in config.serialize_groups]
        stages.append(stage.check(tracker))

    theta = theta_init
    before = initial = expression_errors(pairs, tracker, rig, theta, primary, spurious)
    report = PipelineReport(config.mode, theta_init, theta_init.copy(), initial)
    for stage in stages:
        try:
            result = run_stage(stage, theta, pairs, tracker, rig, tuner)
        except RigTunerError:
            logging.error("Pipeline failed during stage %s", stage.stage_id.value)
            raise
        theta = result.theta_out
        after = expression_errors(pairs, tracker, rig, theta, primary, spurious)
        logging.info(
            "Stage %s: primary error %g -> %g, spurious activation %g -> %g",
            stage.stage_id.value,
            before.primary_total,
            after.primary_total,
            before.spurious_total,
            after.spurious_total,
        )
        report.stages.append(result)
        report.summaries.append(StageSummary(stage.stage_id, before, after))
        before = after

    report.theta_final = theta.copy()
    return report
