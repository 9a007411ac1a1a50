"""
Control-space trajectories of gamma1-only fine-tuning on tiny rigs. Large
unsafeguarded steps push A_hat toward infinity while the tracked controls
approach the origin, which the optimization cannot cross; a perturbed
initial guess avoids it.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from rig_tuner.core import FineTuner, LineSearch, OptimizationReport, OptimizerConfig
from rig_tuner.objectives import GeometryTarget, ObjectiveConfig
from rig_tuner.rigs import LinearRig
from rig_tuner.trackers import DirectTracker, SolveMode

from . import constants
from .repro_result import CsvTable, ReproResult, ReproSettings

DIVERGING_OPTIMIZER = OptimizerConfig(
    step_size=500.0,
    max_iters=100,
    grad_tol=0.0,
    line_search=LineSearch.NONE,
    sample_every=1,
)

CONVERGING_OPTIMIZER = OptimizerConfig(
    step_size=0.05,
    max_iters=20000,
    grad_tol=1e-12,
    target_loss=1e-10,
    line_search=LineSearch.HALVING,
    sample_every=10,
)

GAMMA1_ONLY = ObjectiveConfig(
    gamma1=1.0, gamma2=0.0, gamma3=0.0, gamma_eps=0.0, geometry_target=GeometryTarget.PAIR
)


def control_trajectory(
    a_true: NDArray,
    c_matrix: NDArray,
    v_matrix: NDArray,
    a_init: NDArray,
    opt: OptimizerConfig,
    settings: ReproSettings,
) -> OptimizationReport:
    rig = LinearRig.from_matrix(a_true)
    tracker = DirectTracker(rig, SolveMode.least_squares())
    pairs = constants.pairs_from_columns(c_matrix, v_matrix)
    tuner = FineTuner(opt, jobs=settings.jobs, record_controls=True)
    return tuner.fine_tune(GAMMA1_ONLY, pairs, np.ravel(a_init), tracker, rig)


def _final_controls(report: OptimizationReport) -> NDArray:
    return np.column_stack(report.trajectory[-1].controls)


def _trajectory_table(report: OptimizationReport) -> CsvTable:
    return CsvTable(*report.trajectory_table())


def fig1(settings: ReproSettings) -> ReproResult:
    report = control_trajectory(
        constants.SCALAR_A,
        constants.SCALAR_C,
        constants.SCALAR_V,
        constants.SCALAR_A_INIT,
        DIVERGING_OPTIMIZER,
        settings,
    )
    controls = [float(sample.controls[0][0]) for sample in report.trajectory]
    cells = {
        ("final", "abs_a_hat"): float(abs(report.theta_final[0])),
        ("final", "c"): controls[-1],
        ("trajectory", "max_c"): max(controls),
    }
    return ReproResult("fig1", cells, {"fig1_trajectory": _trajectory_table(report)})


def fig2(settings: ReproSettings) -> ReproResult:
    """Started at the identity, every entry of A_hat diverges."""
    report = control_trajectory(
        constants.SQUARE_A,
        constants.SQUARE_C,
        constants.SQUARE_V,
        constants.SQUARE_A_INIT,
        DIVERGING_OPTIMIZER,
        settings,
    )
    cells = {
        ("final", "min_abs_a_hat"): float(np.min(np.abs(report.theta_final))),
        ("final", "max_abs_c"): float(np.max(np.abs(_final_controls(report)))),
    }
    return ReproResult("fig2", cells, {"fig2_trajectory": _trajectory_table(report)})


def fig3(settings: ReproSettings) -> ReproResult:
    report = control_trajectory(
        constants.SQUARE_A,
        constants.SQUARE_C,
        constants.SQUARE_V,
        constants.SQUARE_A_INIT_OFF_DIAGONAL,
        CONVERGING_OPTIMIZER,
        settings,
    )
    a_hat = report.theta_final.reshape(constants.SQUARE_A.shape)
    cells = {
        ("final", "c_error"): float(np.linalg.norm(_final_controls(report) - constants.SQUARE_C)),
        ("final", "a_error"): float(np.linalg.norm(a_hat - constants.SQUARE_A)),
    }
    return ReproResult("fig3", cells, {"fig3_trajectory": _trajectory_table(report)})
