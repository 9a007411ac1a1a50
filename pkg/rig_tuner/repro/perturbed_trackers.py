"""
Search-direction experiments on trackers that do not invert their rig
exactly: the tracker adds c_tilde (T1) or A_hat c_tilde (T2) to the exact
inverse, so only gamma1 is minimized and dv_hat/dtheta matters.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from rig_tuner.calibration import ExpressionPair
from rig_tuner.core import (
    DiffConfig,
    DvhatSource,
    FineTuner,
    LineSearch,
    OptimizationReport,
    OptimizerConfig,
)
from rig_tuner.differentiation import (
    DEFAULT_S_GRID,
    DirectionStrategy,
    StepPolicy,
    StepSelection,
    select_step,
)
from rig_tuner.objectives import AnalyticDvhat, ObjectiveConfig, make_analytic_dvhat
from rig_tuner.rigs import LinearRig
from rig_tuner.trackers import (
    ControlPerturbation,
    PerturbationMode,
    PerturbedTracker,
    SolveMode,
    tracker_rig_eval,
)
from rig_tuner.utils.file_access import csv_cell

from . import constants
from .repro_result import CsvTable, ReproResult, ReproSettings, finite_or_nan

CONVERGED_LOSS = 1e-7

PERTURBED_OPTIMIZER = OptimizerConfig(
    step_size=0.02,
    max_iters=50000,
    grad_tol=0.0,
    target_loss=CONVERGED_LOSS,
    line_search=LineSearch.HALVING,
    sample_every=100,
)

GAMMA1_ONLY = ObjectiveConfig(gamma1=1.0, gamma2=0.0, gamma3=0.0, gamma_eps=0.0)

SETTINGS_BY_TARGET = {
    "table5": PerturbationMode.T1_ADDITIVE,
    "table6": PerturbationMode.T2_RIG_SCALED,
    "table7": PerturbationMode.T1_ADDITIVE,
    "table8": PerturbationMode.T2_RIG_SCALED,
}


@dataclass
class PerturbedSetting:
    mode: PerturbationMode
    rig: LinearRig
    pairs: list[ExpressionPair]
    c_tilde: NDArray
    tracker: PerturbedTracker
    analytic: AnalyticDvhat = field(repr=False)

    @property
    def label(self) -> str:
        return "t1" if self.mode == PerturbationMode.T1_ADDITIVE else "t2"

    def residual(self, a_hat: NDArray) -> float:
        """
        What gamma1 actually drives to zero: V - A_hat C + A_hat C_tilde (T1)
        or V - A_hat C + A_hat^2 C_tilde (T2).
        """
        c_matrix = constants.first_columns(constants.C, len(self.pairs))
        v_matrix = constants.first_columns(constants.V, len(self.pairs))
        offset = a_hat @ self.c_tilde
        if self.mode == PerturbationMode.T2_RIG_SCALED:
            offset = a_hat @ offset
        return float(np.sum((v_matrix - a_hat @ c_matrix + offset) ** 2))

    def diff_config(self, row: str, seed: int) -> DiffConfig:
        if row == "gamma1 only":
            return DiffConfig()
        if row in ("gamma1 & dvhat", "auto-diff"):
            return DiffConfig(dvhat_source=DvhatSource.ANALYTIC, analytic=self.analytic)
        if row == "steepest descent":
            directions = DirectionStrategy.steepest_descent()
        else:
            directions = DirectionStrategy.random(int(row.split()[0]), seed)
        return DiffConfig(DvhatSource.SECANT, directions, StepPolicy.frozen())

    def run(
        self, row: str, settings: ReproSettings, opt: OptimizerConfig = PERTURBED_OPTIMIZER
    ) -> OptimizationReport:
        # 3 x 3 problems run serially, rows are what settings.jobs spreads out
        tuner = FineTuner(
            opt, self.diff_config(row, settings.seed), dvhat_reference=self.analytic
        )
        report = tuner.fine_tune(
            GAMMA1_ONLY, self.pairs, constants.A_INIT.ravel(), self.tracker, self.rig
        )
        logging.info(
            "%s %s: %s after %d iterations", self.label, row, report.stop_reason, report.iterations
        )
        return report


def perturbed_setting(mode: PerturbationMode, count: int = 3) -> PerturbedSetting:
    """First count pairs, with C_tilde = A^-1 (V_hat - V) looked up per geometry."""
    mode = PerturbationMode(mode)
    rig = LinearRig.from_matrix(constants.A)
    pairs = constants.pairs_from_columns(
        constants.first_columns(constants.C, count), constants.first_columns(constants.V, count)
    )
    c_tilde = constants.perturbation_columns(count)
    perturbation = ControlPerturbation.lookup(mode, [p.v for p in pairs], list(c_tilde.T))
    tracker = PerturbedTracker(rig, perturbation, SolveMode.least_squares())
    return PerturbedSetting(
        mode, rig, pairs, c_tilde, tracker, make_analytic_dvhat(rig, perturbation)
    )


def _iterations(report: OptimizationReport) -> float:
    return finite_or_nan(report.converged_iteration(CONVERGED_LOSS))


def _ratio(numerator: float, denominator: float) -> float:
    if not denominator or math.isnan(denominator):
        return math.nan
    return numerator / denominator


def _run_rows(
    setting: PerturbedSetting,
    runs: list[tuple[str, OptimizerConfig]],
    settings: ReproSettings,
) -> list[OptimizationReport]:
    if settings.jobs <= 1:
        return [setting.run(row, settings, opt) for row, opt in runs]
    with ThreadPoolExecutor(max_workers=settings.jobs) as pool:
        return list(pool.map(lambda run: setting.run(run[0], settings, run[1]), runs))


def search_direction_table(target: str, settings: ReproSettings) -> ReproResult:
    setting = perturbed_setting(SETTINGS_BY_TARGET[target])
    rows = ["gamma1 only", "gamma1 & dvhat"]
    reports = _run_rows(setting, [(row, PERTURBED_OPTIMIZER) for row in rows], settings)
    cells = {}
    for row, report in zip(rows, reports, strict=True):
        a_hat = report.theta_final.reshape(constants.A.shape)
        cells[(row, "residual")] = setting.residual(a_hat)
        cells[(row, "iters")] = _iterations(report)
    cells[("dvhat / none", "iters_ratio")] = _ratio(
        cells[("gamma1 & dvhat", "iters")], cells[("gamma1 only", "iters")]
    )
    table = CsvTable.from_cells(cells, rows, ["residual", "iters"], setting.label)
    return ReproResult(target, cells, {target: table})


# Rows whose iteration count is compared run to convergence, the others only
# over the window their dv_hat/dtheta quality is averaged on.
CONVERGENCE_ROWS = {
    "table7": ("1 random", "steepest descent"),
    "table8": (),
}


def estimator_table(target: str, settings: ReproSettings) -> ReproResult:
    setting = perturbed_setting(SETTINGS_BY_TARGET[target])
    rows = ["1 random", "10 random", "100 random", "auto-diff", "steepest descent"]
    windowed = replace(PERTURBED_OPTIMIZER, max_iters=settings.quality_window)
    runs = [
        (row, PERTURBED_OPTIMIZER if row in CONVERGENCE_ROWS[target] else windowed)
        for row in rows
    ]
    cells = {}
    for row, report in zip(rows, _run_rows(setting, runs, settings), strict=True):
        if row in CONVERGENCE_ROWS[target]:
            cells[(row, "iters")] = _iterations(report)
        cells[(row, "mu_dvhat_norm")] = finite_or_nan(
            report.mean_dvhat_norm(settings.quality_window)
        )
        cells[(row, "mu_lvhat")] = finite_or_nan(report.mean_lvhat(settings.quality_window))

    for numerator, denominator in (("10 random", "1 random"), ("100 random", "10 random")):
        cells[(f"{numerator} / {denominator}", "mu_lvhat_ratio")] = _ratio(
            cells[(numerator, "mu_lvhat")], cells[(denominator, "mu_lvhat")]
        )
    if CONVERGENCE_ROWS[target]:
        cells[("steepest descent / 1 random", "iters_ratio")] = _ratio(
            cells[("steepest descent", "iters")], cells[("1 random", "iters")]
        )
    table = CsvTable.from_cells(
        cells, rows, ["iters", "mu_dvhat_norm", "mu_lvhat"], setting.label
    )
    return ReproResult(target, cells, {target: table})


def table5(settings: ReproSettings) -> ReproResult:
    return search_direction_table("table5", settings)


def table6(settings: ReproSettings) -> ReproResult:
    return search_direction_table("table6", settings)


def table7(settings: ReproSettings) -> ReproResult:
    return estimator_table("table7", settings)


def table8(settings: ReproSettings) -> ReproResult:
    return estimator_table("table8", settings)


def _unit_direction(seed: int, sample_id: int, pair_index: int, size: int) -> NDArray:
    direction = np.random.default_rng([seed, sample_id, pair_index]).standard_normal(size)
    return direction / np.linalg.norm(direction)


def step_landscape(
    setting: PerturbedSetting,
    report: OptimizationReport,
    seed: int,
    tracker: PerturbedTracker | None = None,
) -> list[tuple[int, int, str, StepSelection]]:
    """
    L_delta profile over the interior of the step grid at every trajectory
    sample and pair, along a seeded random unit direction. tracker defaults
    to the setting's own.
    """
    tracker = tracker or setting.tracker
    profiles = []
    for sample in report.trajectory:
        for index, pair in enumerate(setting.pairs):

            def u_eval(theta, v=pair.v):
                return tracker_rig_eval(tracker, setting.rig, v, theta)

            direction = _unit_direction(seed, sample.sample_id, index, setting.rig.n_params)
            selection = select_step(u_eval, sample.theta, direction, DEFAULT_S_GRID)
            profiles.append((sample.sample_id, sample.iteration, pair.name, selection))
    return profiles


# Controls are reported at single precision while the landscape is measured.
LANDSCAPE_CONTROL_DTYPE = np.float32


def fig7(settings: ReproSettings) -> ReproResult:
    interior = DEFAULT_S_GRID[1:-1]
    landscape_rows, profile_rows, cells = [], [], {}

    for mode in (PerturbationMode.T1_ADDITIVE, PerturbationMode.T2_RIG_SCALED):
        setting = perturbed_setting(mode)
        report = setting.run("auto-diff", settings)
        reporting = setting.tracker.reporting_at(LANDSCAPE_CONTROL_DTYPE)
        profiles = step_landscape(setting, report, settings.seed, reporting)
        for sample_id, iteration, name, selection in profiles:
            for s, l_delta in zip(selection.interior_grid, selection.l_delta_profile, strict=True):
                landscape_rows.append([setting.label, sample_id, iteration, name, s, l_delta])

        median = np.nanmedian([selection.l_delta_profile for *_, selection in profiles], axis=0)
        for s, value in zip(interior, median, strict=True):
            profile_rows.append([setting.label, s, value])
        smallest = max(float(np.min(median)), np.finfo(np.float64).tiny)
        chosen = [selection.chosen_s for *_, selection in profiles]
        cells[(setting.label, "argmin_s")] = interior[int(np.argmin(median))]
        cells[(setting.label, "median_chosen_s")] = float(np.median(chosen))
        cells[(setting.label, "low_edge_over_min")] = float(median[0]) / smallest
        cells[(setting.label, "high_edge_over_min")] = float(median[-1]) / smallest

    return ReproResult(
        "fig7",
        cells,
        {
            "fig7_landscape": _rows_table(
                ["setting", "sample_id", "iteration", "pair", "s", "l_delta"], landscape_rows
            ),
            "fig7_profile": _rows_table(["setting", "s", "median_l_delta"], profile_rows),
        },
    )


def _rows_table(header: list[str], rows: list[list]) -> CsvTable:
    return CsvTable(header, [[csv_cell(value) for value in row] for row in rows])
