from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rig_tuner.calibration import JAW_OPEN, JAW_OPEN_EXTREME, ExpressionPair
from rig_tuner.objectives import ObjectiveConfig, SpuriousTerm, TrackerVariant, eval_objective
from rig_tuner.rigs import IndexSet, Rig, RigParams
from rig_tuner.trackers import Tracker
from rig_tuner.utils.errors import MergeConflictError, PipelineConfigError

from .fine_tuner import FineTuner
from .optimization_report import OptimizationReport

DEFAULT_SERIALIZE_GROUPS = [[JAW_OPEN, JAW_OPEN_EXTREME]]


class StageId(Enum):
    S1_DECIMATED = "s1_decimated"
    S2_FILTERED_PRIMARY = "s2_filtered_primary"
    S3_SPURIOUS_SUPPRESSION = "s3_spurious_suppression"
    S4_SPURIOUS_COLUMNS = "s4_spurious_columns"


def _index_set(values: ArrayLike | None) -> IndexSet | None:
    if values is None:
        return None
    return np.unique(np.asarray(values, dtype=np.int64))


@dataclass
class StageConfig:
    """
    One optimization stage. With per_expression, every expression (or
    serialized group of expressions) is tuned on its own parameter set: the
    parameters its variant controls reach, intersected with active_theta and
    minus frozen_theta. The sets must not overlap between units.

    acceptance, when set, is scored on the full tracker. A merged result
    scoring above theta_in is replaced by the candidate with the lowest stage
    objective among theta_in and the trajectory samples that score no higher
    than theta_in; theta_in wins ties.
    """

    stage_id: StageId
    objective: ObjectiveConfig
    active_theta: IndexSet | None = None
    frozen_theta: IndexSet | None = None
    per_expression: bool = True
    serialize_groups: list[list[str]] = field(
        default_factory=lambda: [list(group) for group in DEFAULT_SERIALIZE_GROUPS]
    )
    supervise: bool = False
    acceptance: ObjectiveConfig | None = None

    def __post_init__(self):
        self.stage_id = StageId(self.stage_id)
        self.active_theta = _index_set(self.active_theta)
        self.frozen_theta = _index_set(self.frozen_theta)

    def check(self, tracker: Tracker) -> StageConfig:
        decimated = TrackerVariant.DECIMATED in self.objective.evaluated_variants()
        if decimated and not tracker.capabilities.supports_decimation:
            _error_msg = f"Stage {self.stage_id.value} needs a tracker supporting decimation"
            raise PipelineConfigError(_error_msg)
        if self.active_theta is not None and self.frozen_theta is not None:
            overlap = np.intersect1d(self.active_theta, self.frozen_theta)
            if overlap.size:
                _error_msg = (
                    f"Stage {self.stage_id.value} has parameters both active and frozen: "
                    f"{overlap.tolist()}"
                )
                raise PipelineConfigError(_error_msg)
        return self

    def frozen(self) -> IndexSet:
        if self.frozen_theta is None:
            return np.zeros(0, dtype=np.int64)
        return self.frozen_theta


def default_stage(
    stage_id: StageId,
    rig: Rig,
    primary: Sequence[int],
    spurious: Sequence[int],
    base: ObjectiveConfig | None = None,
    spurious_weight: float = 1.0,
) -> StageConfig:
    """
    S1 tunes each expression's primary columns on the decimated tracker, S2 on
    the filtered tracker, S3 adds suppression of spurious controls and S4
    tunes the spurious columns jointly with the primary columns frozen. Every
    stage only keeps a result that does not raise the primary-control gamma1
    of the full tracker.
    """
    stage_id = StageId(stage_id)
    base = base or ObjectiveConfig()
    primary = sorted(int(i) for i in primary)
    suppression = [
        SpuriousTerm(controls=sorted(int(i) for i in spurious), weight=spurious_weight)
    ]

    if stage_id == StageId.S1_DECIMATED:
        variant, terms = TrackerVariant.DECIMATED, []
    elif stage_id == StageId.S2_FILTERED_PRIMARY:
        variant, terms = TrackerVariant.FILTERED, []
    else:
        variant, terms = TrackerVariant.FILTERED, suppression

    objective = base.replace(
        gamma1_variant=variant,
        gamma2_variant=variant,
        gamma3_variant=variant,
        variant_controls=primary,
        spurious_terms=terms,
        active_theta=None,
    )
    acceptance = primary_acceptance(primary)
    if stage_id != StageId.S4_SPURIOUS_COLUMNS:
        return StageConfig(
            stage_id,
            objective,
            supervise=stage_id == StageId.S1_DECIMATED,
            acceptance=acceptance,
        )

    primary_params = rig.params_of_controls(primary)
    spurious_params = np.setdiff1d(rig.params_of_controls(spurious), primary_params)
    return StageConfig(
        stage_id,
        objective,
        active_theta=spurious_params,
        frozen_theta=primary_params,
        per_expression=False,
        acceptance=acceptance,
    )


def primary_acceptance(primary: Sequence[int]) -> ObjectiveConfig:
    """gamma1 of the full tracker restricted to each expression's primary controls."""
    return ObjectiveConfig(
        gamma1=1.0,
        gamma2=0.0,
        gamma3=0.0,
        gamma_eps=0.0,
        gamma1_variant=TrackerVariant.FILTERED,
        variant_controls=sorted(int(i) for i in primary),
    )


class StageOutcome(Enum):
    """Which candidate the stage acceptance kept."""

    TUNED = "tuned"
    SAMPLE = "sample"
    INPUT = "input"


@dataclass
class StageResult:
    stage_id: StageId
    theta_in: RigParams
    theta_out: RigParams
    samples: list[RigParams]
    reports: list[OptimizationReport]
    units: list[list[str]]
    accepted: StageOutcome = StageOutcome.TUNED


@dataclass
class _Unit:
    pair_indices: list[int]
    theta: IndexSet

    def names(self, pairs: Sequence[ExpressionPair]) -> list[str]:
        return [pairs[i].name for i in self.pair_indices]


def _expression_theta(stage: StageConfig, pair: ExpressionPair, rig: Rig) -> IndexSet:
    mask = stage.objective.variant_mask(pair, rig.n_controls)
    active = set(mask.indices.tolist())
    factors = [f for f in range(rig.n_factors) if set(rig.factor_controls(f)) <= active]
    theta = rig.params_of_factors(factors)
    if stage.active_theta is not None:
        theta = np.intersect1d(theta, stage.active_theta)
    return np.setdiff1d(theta, stage.frozen())


def _expression_units(
    stage: StageConfig, pairs: Sequence[ExpressionPair], rig: Rig
) -> list[_Unit]:
    group_of = {}
    for group_index, group in enumerate(stage.serialize_groups):
        for name in group:
            group_of[name] = group_index

    units: list[_Unit] = []
    grouped: dict[int, _Unit] = {}
    for index, pair in enumerate(pairs):
        theta = _expression_theta(stage, pair, rig)
        if pair.name in group_of:
            unit = grouped.get(group_of[pair.name])
            if unit is not None:
                unit.pair_indices.append(index)
                unit.theta = np.union1d(unit.theta, theta)
                continue
            unit = _Unit([index], theta)
            grouped[group_of[pair.name]] = unit
        else:
            unit = _Unit([index], theta)
        units.append(unit)

    kept = []
    for unit in units:
        if unit.theta.size == 0:
            logging.debug("No parameter to tune for %s", unit.names(pairs))
            continue
        kept.append(unit)

    for i, unit in enumerate(kept):
        for other in kept[i + 1 :]:
            overlap = np.intersect1d(unit.theta, other.theta)
            if overlap.size:
                _error_msg = (
                    f"Expressions {unit.names(pairs)} and {other.names(pairs)} "
                    f"update the same parameters"
                )
                raise MergeConflictError(_error_msg, overlap)
    return kept


def score_samples(
    samples: Sequence[ArrayLike],
    pairs: Sequence[ExpressionPair],
    full_tracker: Tracker,
    rig: Rig,
    criterion: ObjectiveConfig | None = None,
) -> list[float]:
    criterion = criterion or ObjectiveConfig(gamma1=1.0, gamma2=0.0, gamma_eps=0.0)
    scores = []
    for sample in samples:
        total = eval_objective(criterion, pairs, sample, full_tracker, rig).total
        scores.append(total if np.isfinite(total) else np.inf)
    return scores


def select_best_sample(
    samples: Sequence[ArrayLike],
    pairs: Sequence[ExpressionPair],
    full_tracker: Tracker,
    rig: Rig,
    criterion: ObjectiveConfig | None = None,
) -> RigParams:
    """
    Sample minimizing the full-tracker criterion (gamma1 by default), the
    earliest one on ties.
    """
    index, _ = _best_index(samples, pairs, full_tracker, rig, criterion)
    return np.array(samples[index], dtype=np.float64)


def _best_index(
    samples: Sequence[ArrayLike],
    pairs: Sequence[ExpressionPair],
    full_tracker: Tracker,
    rig: Rig,
    criterion: ObjectiveConfig | None,
) -> tuple[int, list[float]]:
    if not samples:
        _error_msg = "Cannot select among zero samples"
        raise PipelineConfigError(_error_msg)
    scores = score_samples(samples, pairs, full_tracker, rig, criterion)
    return int(np.argmin(scores)), scores


def _supervise(
    report: OptimizationReport,
    pairs: Sequence[ExpressionPair],
    full_tracker: Tracker,
    rig: Rig,
) -> None:
    samples = [sample.theta for sample in report.trajectory]
    index, scores = _best_index(samples, pairs, full_tracker, rig, None)
    report.chosen_sample = report.trajectory[index].sample_id
    report.chosen_theta = samples[index].copy()
    report.supervision_scores = scores


def _run_serialized(
    stage: StageConfig,
    unit_pairs: Sequence[ExpressionPair],
    theta_in: NDArray,
    active: IndexSet,
    tracker: Tracker,
    rig: Rig,
    tuner: FineTuner,
) -> list[OptimizationReport]:
    """Tune the pairs of one unit one after the other, each from the last result."""
    objective = stage.objective.replace(active_theta=active)
    reports = []
    theta = theta_in
    for pair in unit_pairs:
        report = tuner.fine_tune(objective, [pair], theta, tracker, rig)
        if stage.supervise:
            _supervise(report, [pair], tracker, rig)
        reports.append(report)
        theta = report.chosen_theta
    return reports


def run_stage(
    stage: StageConfig,
    theta_in: ArrayLike,
    pairs: Sequence[ExpressionPair],
    tracker: Tracker,
    rig: Rig,
    tuner: FineTuner | None = None,
) -> StageResult:
    stage.check(tracker)
    tuner = tuner or FineTuner()
    theta_in = rig.check_theta(theta_in).copy()
    frozen = stage.frozen()
    tuner.stage_started(stage.stage_id.value)

    if stage.per_expression:
        units = _expression_units(stage, pairs, rig)
    else:
        active = np.arange(rig.n_params) if stage.active_theta is None else stage.active_theta
        active = np.setdiff1d(active, frozen)
        units = [_Unit(list(range(len(pairs))), active)] if active.size else []

    def run(unit: _Unit) -> list[OptimizationReport]:
        unit_pairs = [pairs[i] for i in unit.pair_indices]
        if stage.per_expression:
            return _run_serialized(stage, unit_pairs, theta_in, unit.theta, tracker, rig, tuner)
        report = tuner.fine_tune(
            stage.objective.replace(active_theta=unit.theta), unit_pairs, theta_in, tracker, rig
        )
        if stage.supervise:
            _supervise(report, unit_pairs, tracker, rig)
        return [report]

    if tuner.jobs <= 1 or len(units) <= 1:
        unit_reports = [run(unit) for unit in units]
    else:
        with ThreadPoolExecutor(max_workers=tuner.jobs) as pool:
            unit_reports = list(pool.map(run, units))

    theta_out = theta_in.copy()
    samples: list[RigParams] = []
    reports: list[OptimizationReport] = []
    for unit, unit_report in zip(units, unit_reports, strict=True):
        theta_out[unit.theta] = unit_report[-1].chosen_theta[unit.theta]
        for report in unit_report:
            samples += [sample.theta for sample in report.trajectory]
            reports.append(report)
    theta_out[frozen] = theta_in[frozen]

    accepted = StageOutcome.TUNED
    if stage.acceptance is not None:
        theta_out, accepted = _accept(stage, theta_in, theta_out, samples, pairs, tracker, rig)

    total = eval_objective(stage.objective, pairs, theta_out, tracker, rig).total
    logging.info("Stage %s finished with objective %g", stage.stage_id.value, total)
    tuner.stage_completed(stage.stage_id.value, total)
    return StageResult(
        stage_id=stage.stage_id,
        theta_in=theta_in,
        theta_out=theta_out,
        samples=samples,
        reports=reports,
        units=[unit.names(pairs) for unit in units],
        accepted=accepted,
    )


def _accept(
    stage: StageConfig,
    theta_in: RigParams,
    theta_out: RigParams,
    samples: Sequence[RigParams],
    pairs: Sequence[ExpressionPair],
    tracker: Tracker,
    rig: Rig,
) -> tuple[RigParams, StageOutcome]:
    candidates = [theta_out, theta_in, *samples]
    scores = score_samples(candidates, pairs, tracker, rig, stage.acceptance)
    if scores[0] <= scores[1]:
        return theta_out, StageOutcome.TUNED

    admissible = [i for i in range(1, len(candidates)) if scores[i] <= scores[1]]
    kept = [candidates[i] for i in admissible]
    totals = score_samples(kept, pairs, tracker, rig, stage.objective)
    index = admissible[int(np.argmin(totals))]
    if index == 1:
        logging.warning(
            "Stage %s raised the acceptance score from %g to %g, keeping its input",
            stage.stage_id.value,
            scores[1],
            scores[0],
        )
        return theta_in.copy(), StageOutcome.INPUT
    logging.info(
        "Stage %s keeps a trajectory sample scoring %g instead of %g",
        stage.stage_id.value,
        scores[index],
        scores[0],
    )
    chosen = np.array(candidates[index], dtype=np.float64)
    chosen[stage.frozen()] = theta_in[stage.frozen()]
    return chosen, StageOutcome.SAMPLE
