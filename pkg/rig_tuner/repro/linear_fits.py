"""
Fine-tuning the tracker rig of a 3 x 3 linear example against the direct
least-squares fit, with consistent (V) or perturbed (V_hat) geometry.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from rig_tuner.calibration import ExpressionPair
from rig_tuner.core import FineTuner, LineSearch, OptimizerConfig
from rig_tuner.objectives import (
    GeometryTarget,
    ObjectiveConfig,
    direct_fit,
    direct_loss,
    eval_objective,
)
from rig_tuner.rigs import LinearRig
from rig_tuner.trackers import DirectTracker, SolveMode

from . import constants
from .repro_result import CsvTable, ReproResult, ReproSettings

LINEAR_FIT_OPTIMIZER = OptimizerConfig(
    step_size=0.02,
    max_iters=20000,
    grad_tol=1e-9,
    target_loss=1e-12,
    line_search=LineSearch.ADAPTIVE,
    sample_every=1000,
)

# (gamma1, gamma2, gamma_eps) per row
FIT_ROWS: dict[str, tuple[float, float, float]] = {
    "gamma1 only": (1.0, 0.0, 0.0),
    "gamma2 only": (0.0, 1.0, 0.0),
    "gamma1 & gamma_eps": (1.0, 0.0, 0.1),
    "gamma2 & gamma_eps": (0.0, 1.0, 0.1),
}

# Unweighted gamma terms at a fitted theta, reported next to L_D.
CRITERION = ObjectiveConfig(
    gamma1=1.0, gamma2=1.0, gamma3=1.0, gamma_eps=0.0, geometry_target=GeometryTarget.PAIR
)


@dataclass
class LinearExample:
    rig: LinearRig
    pairs: list[ExpressionPair]

    @classmethod
    def from_columns(cls, v_matrix: NDArray, count: int) -> LinearExample:
        rig = LinearRig.from_matrix(constants.A)
        pairs = constants.pairs_from_columns(
            constants.first_columns(constants.C, count), constants.first_columns(v_matrix, count)
        )
        return cls(rig, pairs)

    @property
    def tracker(self) -> DirectTracker:
        return DirectTracker(self.rig, SolveMode.least_squares())

    def fit_objective(self, row: str) -> ObjectiveConfig:
        gamma1, gamma2, gamma_eps = FIT_ROWS[row]
        return ObjectiveConfig(
            gamma1=gamma1,
            gamma2=gamma2,
            gamma3=0.0,
            gamma_eps=gamma_eps,
            geometry_target=GeometryTarget.PAIR,
        )

    def fine_tuned(self, row: str) -> NDArray:
        tuner = FineTuner(LINEAR_FIT_OPTIMIZER)
        report = tuner.fine_tune(
            self.fit_objective(row), self.pairs, constants.A_INIT.ravel(), self.tracker, self.rig
        )
        logging.info("%s: %s after %d iterations", row, report.stop_reason, report.iterations)
        return report.theta_final.reshape(constants.A.shape)

    def direct(self) -> NDArray:
        return direct_fit(self.pairs).a_matrix(constants.A.shape[0])

    def metrics(self, a_hat: NDArray, references: dict[str, NDArray]) -> dict[str, float]:
        terms = eval_objective(CRITERION, self.pairs, a_hat.ravel(), self.tracker, self.rig)
        metrics = {
            "L_D": direct_loss(a_hat, self.pairs),
            "L_gamma1": terms.gamma1,
            "L_gamma2": terms.gamma2,
            "L_gamma_sum": terms.gamma_sum,
        }
        for name, reference in references.items():
            metrics[name] = float(np.sum((a_hat - reference) ** 2))
        return metrics


def _fit_rows(example: LinearExample, rows: list[str], settings: ReproSettings) -> list[NDArray]:
    if settings.jobs <= 1:
        return [example.fine_tuned(row) for row in rows]
    with ThreadPoolExecutor(max_workers=settings.jobs) as pool:
        return list(pool.map(example.fine_tuned, rows))


def _linear_table(
    target: str,
    example: LinearExample,
    rows: list[str],
    columns: list[str],
    references: dict[str, NDArray],
    settings: ReproSettings,
) -> ReproResult:
    fits = {"Direct": example.direct()}
    fits.update(zip(rows, _fit_rows(example, rows, settings), strict=True))

    cells = {}
    for row, a_hat in fits.items():
        for column, value in example.metrics(a_hat, references).items():
            if column in columns:
                cells[(row, column)] = value
    table = CsvTable.from_cells(cells, list(fits), columns)
    return ReproResult(target, cells, {target: table})


def table1(settings: ReproSettings) -> ReproResult:
    example = LinearExample.from_columns(constants.V, 4)
    return _linear_table(
        "table1",
        example,
        ["gamma1 only", "gamma2 only"],
        ["L_D", "L_gamma_sum", "err_A"],
        {"err_A": constants.A},
        settings,
    )


def table2(settings: ReproSettings) -> ReproResult:
    """Two pairs leave one direction of A free; A2 is the minimum-norm fit."""
    example = LinearExample.from_columns(constants.V, 2)
    return _linear_table(
        "table2",
        example,
        list(FIT_ROWS),
        ["L_D", "L_gamma1", "L_gamma2", "L_gamma_sum", "err_A2", "err_A"],
        {"err_A2": example.direct(), "err_A": constants.A},
        settings,
    )


def table3(settings: ReproSettings) -> ReproResult:
    """Over-determined perturbed data; A4 is its least-squares fit."""
    example = LinearExample.from_columns(constants.V_HAT, 4)
    return _linear_table(
        "table3",
        example,
        ["gamma1 only", "gamma2 only"],
        ["L_D", "L_gamma1", "L_gamma2", "err_A4", "err_A"],
        {"err_A4": example.direct(), "err_A": constants.A},
        settings,
    )


def table4(settings: ReproSettings) -> ReproResult:
    example = LinearExample.from_columns(constants.V_HAT, 2)
    a2_star = constants.completed_fit(
        constants.first_columns(constants.C, 2),
        constants.first_columns(constants.V_HAT, 2),
        constants.A,
    )
    return _linear_table(
        "table4",
        example,
        list(FIT_ROWS),
        ["L_D", "L_gamma1", "L_gamma2", "err_A2star", "err_A"],
        {"err_A2star": a2_star, "err_A": constants.A},
        settings,
    )
