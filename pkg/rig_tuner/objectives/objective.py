from __future__ import annotations

from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rig_tuner.calibration import ExpressionPair
from rig_tuner.rigs import Rig
from rig_tuner.trackers import Tracker
from rig_tuner.utils.errors import RigContractError

from .loss_breakdown import LossBreakdown
from .objective_config import ObjectiveConfig, TrackerVariant
from .pair_evaluation import PairEvaluation, PairSetup, evaluate_pair, prepare_pairs

PairJacobians = Mapping[TrackerVariant, NDArray] | NDArray


def evaluate_pairs(
    setups: Sequence[PairSetup],
    config: ObjectiveConfig,
    tracker: Tracker,
    rig: Rig,
    theta_T: ArrayLike,
    jobs: int = 1,
) -> list[PairEvaluation]:
    """
    Evaluate every pair, in pair order whatever the number of workers.
    """
    theta_T = rig.check_theta(theta_T)
    if jobs <= 1 or len(setups) == 1:
        return [evaluate_pair(setup, config, tracker, rig, theta_T) for setup in setups]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(
            pool.map(lambda setup: evaluate_pair(setup, config, tracker, rig, theta_T), setups)
        )


def summarize(
    config: ObjectiveConfig,
    evaluations: Sequence[PairEvaluation],
    theta_T: ArrayLike,
    rig: Rig,
) -> LossBreakdown:
    theta_T = rig.check_theta(theta_T)
    active = config.active_indices(rig)
    delta = (theta_T - config.reference_theta(rig))[active]

    terms = dict.fromkeys(("gamma1", "gamma2", "gamma3"), 0.0)
    spurious = [0.0] * len(config.spurious_terms)
    per_expression = {}
    for evaluation in evaluations:
        for name, value in evaluation.terms().items():
            terms[name] += evaluation.weight * value
        for i, value in enumerate(evaluation.spurious_terms()):
            spurious[i] += evaluation.weight * value
        per_expression[evaluation.name] = evaluation.value(config)

    weights = {
        "gamma1": config.gamma1,
        "gamma2": config.gamma2,
        "gamma3": config.gamma3,
        "gamma_eps": config.gamma_eps,
    }
    for i, term in enumerate(config.spurious_terms):
        weights[f"spurious_{i}"] = term.weight

    breakdown = LossBreakdown(
        gamma1=terms["gamma1"],
        gamma2=terms["gamma2"],
        gamma3=terms["gamma3"],
        gamma_eps=float(delta @ delta),
        spurious=spurious,
        per_expression=per_expression,
        weights=weights,
    )
    breakdown.total = breakdown.recompute_total()
    return breakdown


def eval_objective(
    config: ObjectiveConfig,
    pairs: Sequence[ExpressionPair],
    theta_T: ArrayLike,
    tracker: Tracker,
    rig: Rig,
) -> LossBreakdown:
    setups = prepare_pairs(config, pairs, tracker, rig)
    evaluations = evaluate_pairs(setups, config, tracker, rig, theta_T)
    return summarize(config, evaluations, theta_T, rig)


def _jacobian_for(
    jacobians: PairJacobians, variant: TrackerVariant, shape: tuple[int, int]
) -> NDArray:
    if isinstance(jacobians, Mapping):
        try:
            matrix = jacobians[variant]
        except KeyError:
            _error_msg = f"Missing dT/dtheta for the {variant.value} tracker"
            raise RigContractError(_error_msg) from None
    else:
        matrix = jacobians
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != shape:
        _error_msg = f"dT/dtheta of shape {matrix.shape} does not match {shape}"
        raise RigContractError(_error_msg)
    return matrix


def objective_gradient(
    config: ObjectiveConfig,
    evaluations: Sequence[PairEvaluation],
    theta_T: ArrayLike,
    rig: Rig,
    jacobians: Sequence[PairJacobians],
) -> NDArray:
    """
    Gradient over the active parameters given dT/dtheta (n x |active|) for
    each pair and tracker variant.
    """
    if len(jacobians) != len(evaluations):
        _error_msg = f"Expected {len(evaluations)} dT/dtheta entries, got {len(jacobians)}"
        raise RigContractError(_error_msg)
    theta_T = rig.check_theta(theta_T)
    theta_R = config.reference_theta(rig)
    active = config.active_indices(rig)
    shape = (rig.n_controls, active.shape[0])

    gradient = np.zeros(active.shape[0])
    for evaluation, pair_jacobians in zip(evaluations, jacobians, strict=True):
        rows = evaluation.setup.rows
        pair_gradient = np.zeros(active.shape[0])

        if config.gamma1 > 0:
            dT = _jacobian_for(pair_jacobians, config.gamma1_variant, shape)
            pair_gradient += 2 * config.gamma1 * evaluation.gamma1_residual @ dT

        if config.gamma2 > 0:
            dT = _jacobian_for(pair_jacobians, config.gamma2_variant, shape)
            c2 = evaluation.controls[config.gamma2_variant]
            dR_dc = rig.jacobian_controls(c2, theta_R)[rows]
            pair_gradient += 2 * config.gamma2 * (evaluation.gamma2_residual @ dR_dc) @ dT

        if config.gamma3 > 0:
            dT = _jacobian_for(pair_jacobians, config.gamma3_variant, shape)
            c3 = evaluation.controls[config.gamma3_variant]
            residual = evaluation.gamma3_residual
            dR_dc = rig.jacobian_controls(c3, theta_T)[rows]
            dR_dtheta = rig.jacobian_params(c3)[rows][:, active]
            pair_gradient += (
                2 * config.gamma3 * ((residual @ dR_dc) @ dT + dR_dtheta.T @ residual)
            )

        if config.spurious_terms:
            dT = None
            for term, residual in zip(
                config.spurious_terms, evaluation.spurious_residuals, strict=True
            ):
                if term.weight == 0:
                    continue
                if dT is None:
                    dT = _jacobian_for(pair_jacobians, TrackerVariant.FULL, shape)
                pair_gradient += 2 * term.weight * residual @ dT

        gradient += evaluation.weight * pair_gradient

    gradient += 2 * config.gamma_eps * (theta_T - theta_R)[active]
    return gradient


def grad_objective(
    config: ObjectiveConfig,
    pairs: Sequence[ExpressionPair],
    theta_T: ArrayLike,
    tracker: Tracker,
    rig: Rig,
    dT_dtheta: Sequence[PairJacobians],  # noqa: N803
) -> NDArray:
    setups = prepare_pairs(config, pairs, tracker, rig)
    evaluations = evaluate_pairs(setups, config, tracker, rig, theta_T)
    return objective_gradient(config, evaluations, theta_T, rig, dT_dtheta)
