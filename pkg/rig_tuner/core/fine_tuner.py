from __future__ import annotations

import logging
import time
from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from undo_stack import Signal, SignalContainer

from rig_tuner.calibration import ExpressionPair
from rig_tuner.differentiation import SecantDiagnostics
from rig_tuner.objectives import (
    AnalyticDvhat,
    LossBreakdown,
    ObjectiveConfig,
    PairEvaluation,
    TrackerVariant,
    evaluate_pairs,
    objective_gradient,
    prepare_pairs,
    summarize,
)
from rig_tuner.rigs import Rig
from rig_tuner.trackers import CountingTracker, GeometryCorrection, Tracker
from rig_tuner.utils.errors import NonFiniteLossError

from .optimization_report import IterationRecord, OptimizationReport, TrajectorySample
from .optimizer_config import DiffConfig, DvhatSource, LineSearch, OptimizerConfig
from .tracker_differentiator import TrackerDifferentiator


class FineTuner(SignalContainer):
    """
    Gradient descent on the tracker rig parameters theta_T.

    Only the objective's active parameters move; every other entry of theta
    keeps its initial value bit for bit. The same instance can run several
    optimizations concurrently, it holds no per-run state.
    """

    iteration_completed = Signal(int, float)
    stage_started = Signal(str)
    stage_completed = Signal(str, float)

    def __init__(
        self,
        opt: OptimizerConfig | None = None,
        diff: DiffConfig | None = None,
        *,
        jobs: int = 1,
        diagnostics: SecantDiagnostics | None = None,
        correction: GeometryCorrection | None = None,
        dvhat_reference: AnalyticDvhat | None = None,
        record_controls: bool = False,
    ):
        self.opt = opt or OptimizerConfig()
        self.diff = diff or DiffConfig()
        self.jobs = jobs
        self.diagnostics = diagnostics
        self.correction = correction
        self.dvhat_reference = dvhat_reference
        self.record_controls = record_controls

    def fine_tune(
        self,
        objective: ObjectiveConfig,
        pairs: Sequence[ExpressionPair],
        theta_init: ArrayLike,
        tracker: Tracker,
        rig: Rig,
    ) -> OptimizationReport:
        start = time.perf_counter()
        opt = self.opt
        counting = CountingTracker(tracker)
        setups = prepare_pairs(objective, pairs, counting, rig)
        active = objective.active_indices(rig)
        theta_init = rig.check_theta(theta_init).copy()
        theta = theta_init.copy()
        differentiator = TrackerDifferentiator(
            self.diff,
            objective,
            counting,
            rig,
            jobs=self.jobs,
            seed=opt.seed,
            diagnostics=self.diagnostics,
            correction=self.correction,
        )

        evaluations = evaluate_pairs(setups, objective, counting, rig, theta, self.jobs)
        loss = summarize(objective, evaluations, theta, rig)
        self._check_finite(loss, 0, theta)

        trace: list[IterationRecord] = []
        trajectory = [self._sample(0, 0, theta, loss, evaluations, objective)]
        stop_reason = "max_iters"
        iterations = 0
        trial_step = opt.step_size

        for iteration in range(opt.max_iters):
            if opt.target_loss is not None and loss.total <= opt.target_loss:
                stop_reason = "target_loss"
                break

            if self.diagnostics is not None:
                self.diagnostics.iteration = iteration
            gradient, record = self._gradient(
                objective, differentiator, evaluations, theta, rig, iteration, loss
            )
            trace.append(record)
            self.iteration_completed(iteration, loss.total)

            if active.size == 0 or record.grad_norm <= opt.grad_tol:
                stop_reason = "grad_tol"
                break

            step = trial_step
            attempts = 1 if opt.line_search == LineSearch.NONE else opt.max_halvings + 1
            for _ in range(attempts):
                candidate = theta.copy()
                candidate[active] -= step * gradient
                candidate_evaluations = evaluate_pairs(
                    setups, objective, counting, rig, candidate, self.jobs
                )
                candidate_loss = summarize(objective, candidate_evaluations, candidate, rig)
                if opt.line_search == LineSearch.NONE:
                    self._check_finite(candidate_loss, iteration + 1, candidate)
                    break
                if np.isfinite(candidate_loss.total) and candidate_loss.total < loss.total:
                    break
                step *= 0.5
            else:
                stop_reason = "line_search"
                logging.debug("Line search found no decrease at iteration %d", iteration)
                break

            record.step = step
            if opt.line_search == LineSearch.ADAPTIVE:
                trial_step = 2.0 * step
            decrease = loss.total - candidate_loss.total
            theta, evaluations, loss = candidate, candidate_evaluations, candidate_loss
            iterations = iteration + 1
            if iterations % opt.sample_every == 0:
                trajectory.append(
                    self._sample(len(trajectory), iterations, theta, loss, evaluations, objective)
                )
            if opt.loss_tol > 0 and 0 <= decrease < opt.loss_tol:
                stop_reason = "loss_tol"
                break

        if trajectory[-1].iteration != iterations:
            trajectory.append(
                self._sample(len(trajectory), iterations, theta, loss, evaluations, objective)
            )

        wall_clock = time.perf_counter() - start
        logging.info(
            "Fine-tuning stopped on %s after %d iterations, loss %g, %d tracker calls, %.2fs",
            stop_reason,
            iterations,
            loss.total,
            counting.evaluation_count,
            wall_clock,
        )
        return OptimizationReport(
            theta_init=theta_init,
            theta_final=theta,
            trace=trace,
            trajectory=trajectory,
            final_loss=loss,
            iterations=iterations,
            stop_reason=stop_reason,
            evaluation_count=counting.evaluation_count,
            pair_names=[pair.name for pair in pairs],
            wall_clock=wall_clock,
        )

    def _gradient(
        self,
        objective: ObjectiveConfig,
        differentiator: TrackerDifferentiator,
        evaluations: list[PairEvaluation],
        theta: NDArray,
        rig: Rig,
        iteration: int,
        loss: LossBreakdown,
    ) -> tuple[NDArray, IterationRecord]:
        hint = None
        if self.diff.dvhat_source == DvhatSource.SECANT and self.diff.directions.needs_gradient:
            pre_update = differentiator.jacobians(evaluations, theta, update=False)
            hint = objective_gradient(objective, evaluations, theta, rig, pre_update)

        jacobians = differentiator.jacobians(evaluations, theta, gradient=hint)
        gradient = objective_gradient(objective, evaluations, theta, rig, jacobians)
        record = IterationRecord(iteration, loss, float(np.linalg.norm(gradient)))

        if self.dvhat_reference is not None and self.diff.dvhat_source != DvhatSource.NONE:
            active = differentiator.active_theta
            lvhat, norm = 0.0, 0.0
            for evaluation in evaluations:
                exact = self.dvhat_reference(evaluation.setup.pair.v, theta)[:, active]
                estimate = differentiator.latest_dvhat(evaluation.setup.index, TrackerVariant.FULL)
                if estimate is None:
                    estimate = np.zeros_like(exact)
                lvhat += float(np.sum((estimate - exact) ** 2))
                norm += float(np.sum(estimate**2))
            record.lvhat, record.dvhat_norm = lvhat, norm
        return gradient, record

    def _sample(
        self,
        sample_id: int,
        iteration: int,
        theta: NDArray,
        loss: LossBreakdown,
        evaluations: list[PairEvaluation],
        objective: ObjectiveConfig,
    ) -> TrajectorySample:
        controls = []
        if self.record_controls:
            controls = [e.controls[objective.gamma1_variant].copy() for e in evaluations]
        return TrajectorySample(sample_id, iteration, theta.copy(), loss.total, controls)

    @staticmethod
    def _check_finite(loss: LossBreakdown, iteration: int, theta: NDArray) -> None:
        if not np.isfinite(loss.total):
            _error_msg = f"Objective became non-finite at iteration {iteration}"
            raise NonFiniteLossError(_error_msg, iteration, theta)


def fine_tune(
    objective: ObjectiveConfig,
    pairs: Sequence[ExpressionPair],
    theta_init: ArrayLike,
    tracker: Tracker,
    rig: Rig,
    opt: OptimizerConfig | None = None,
    diff: DiffConfig | None = None,
    **kwargs,
) -> OptimizationReport:
    return FineTuner(opt, diff, **kwargs).fine_tune(objective, pairs, theta_init, tracker, rig)
