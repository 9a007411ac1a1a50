"""
Simon-Says rig calibration: least-squares fit of rig parameters to
(control, geometry) pairs.

Each parameter sits at one geometry row, so the normal equations split into
one small system per row. Rows are solved independently.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from rig_tuner.rigs import Rig, RigParams
from rig_tuner.rigs.rig import as_vector
from rig_tuner.utils.errors import RigContractError, UnderdeterminedSystemError
from rig_tuner.utils.file_access import reject_unknown_fields

from .expression_pair import ExpressionPair


@dataclass
class CalibrationConfig:
    """
    epsilon_reg weights the rows eps * (theta - theta_prior). theta_prior
    defaults to the rig's current parameters. Parameters outside
    active_param_set are returned equal to theta_prior.
    """

    epsilon_reg: float = 0.0
    theta_prior: ArrayLike | None = None
    active_param_set: ArrayLike | None = None

    def __post_init__(self):
        if not np.isfinite(self.epsilon_reg) or self.epsilon_reg < 0:
            _error_msg = f"epsilon_reg must be a nonnegative real, got {self.epsilon_reg}"
            raise RigContractError(_error_msg)

    @classmethod
    def from_dict(cls, content: dict) -> CalibrationConfig:
        reject_unknown_fields(cls, content)
        return cls(**content)

    def to_dict(self) -> dict:
        def listed(values):
            return None if values is None else np.asarray(values).tolist()

        return {
            "epsilon_reg": self.epsilon_reg,
            "theta_prior": listed(self.theta_prior),
            "active_param_set": listed(self.active_param_set),
        }

    def prior(self, rig: Rig) -> RigParams:
        if self.theta_prior is None:
            return rig.theta.copy()
        return as_vector(self.theta_prior, "theta_prior", rig.n_params).copy()

    def active_mask(self, rig: Rig) -> NDArray[np.bool_]:
        if self.active_param_set is None:
            return np.ones(rig.n_params, dtype=bool)
        indices = np.asarray(self.active_param_set, dtype=np.int64)
        if indices.size and (indices.min() < 0 or indices.max() >= rig.n_params):
            _error_msg = "active_param_set has indices outside the rig parameters"
            raise RigContractError(_error_msg)
        mask = np.zeros(rig.n_params, dtype=bool)
        mask[indices] = True
        return mask


def _solve_normal_equations(normal: NDArray, rhs: NDArray) -> NDArray:
    try:
        factor = scipy.linalg.cho_factor(normal)
        return scipy.linalg.cho_solve(factor, rhs)
    except scipy.linalg.LinAlgError:
        return scipy.linalg.pinvh(normal) @ rhs


def _null_parameters(design: NDArray, params: NDArray) -> list[int]:
    if design.shape[0] == 0:
        return [int(p) for p in params]
    _, singular_values, vt = scipy.linalg.svd(design, full_matrices=True)
    tol = max(design.shape) * np.finfo(float).eps * singular_values[0]
    rank = int(np.sum(singular_values > tol))
    if rank == design.shape[1]:
        return []
    null_space = vt[rank:]
    involved = np.any(np.abs(null_space) > 1e-8, axis=0)
    return [int(p) for p in params[involved]]


def _row_groups(rig: Rig) -> list[NDArray[np.int64]]:
    order = np.argsort(rig.param_rows, kind="stable")
    boundaries = np.searchsorted(rig.param_rows[order], np.arange(rig.m_geometry + 1))
    return [order[boundaries[i] : boundaries[i + 1]] for i in range(rig.m_geometry)]


def fit_rig_params(
    rig: Rig,
    pairs: Sequence[ExpressionPair],
    config: CalibrationConfig | None = None,
) -> RigParams:
    """
    Minimize sum_k w_k ||R(c_k; theta) - v_k||^2 over each pair's masked rows,
    plus eps^2 ||theta - theta_prior||^2.

    With eps = 0, parameters with no residual dependence stay at the prior and
    parameters that appear in residuals but are not identifiable raise
    UnderdeterminedSystemError.
    """
    config = config or CalibrationConfig()
    if not pairs:
        _error_msg = "At least one expression pair is required for fitting"
        raise RigContractError(_error_msg)

    for pair in pairs:
        pair.check(rig)

    theta_prior = config.prior(rig)
    active = config.active_mask(rig)
    eps2 = config.epsilon_reg**2

    factors = np.array([rig.factors(pair.c) for pair in pairs])
    targets = np.array([pair.v - rig.neutral_offset for pair in pairs])
    sqrt_weights = np.sqrt([pair.weight for pair in pairs])
    observed = np.array([pair.row_selector() for pair in pairs]) & (sqrt_weights[:, None] > 0)

    theta = theta_prior.copy()
    null_params: list[int] = []
    for row, params in enumerate(_row_groups(rig)):
        if params.size == 0:
            continue
        samples = observed[:, row]
        design = factors[samples][:, rig.param_factors[params]] * sqrt_weights[samples, None]
        target = targets[samples, row] * sqrt_weights[samples]

        fixed = ~active[params]
        target = target - design[:, fixed] @ theta_prior[params[fixed]]
        design, params = design[:, ~fixed], params[~fixed]
        if params.size == 0:
            continue

        if eps2 > 0:
            normal = design.T @ design + eps2 * np.eye(params.size)
            rhs = design.T @ target + eps2 * theta_prior[params]
            theta[params] = _solve_normal_equations(normal, rhs)
            continue

        touched = np.any(design != 0, axis=0)
        design, params = design[:, touched], params[touched]
        if params.size == 0:
            continue

        row_null = _null_parameters(design, params)
        if row_null:
            null_params.extend(row_null)
            continue
        theta[params] = _solve_normal_equations(design.T @ design, design.T @ target)

    if null_params:
        preview = ", ".join(str(p) for p in null_params[:20])
        _error_msg = (
            f"Underdetermined fit: {len(null_params)} parameters lie in the null space "
            f"({preview}{', ...' if len(null_params) > 20 else ''}); "
            "add pairs or set epsilon_reg > 0"
        )
        raise UnderdeterminedSystemError(_error_msg, null_params)

    logging.debug("Fitted %d rig parameters from %d pairs", int(active.sum()), len(pairs))
    return theta


def fit_residuals(
    rig: Rig, pairs: Sequence[ExpressionPair], theta: ArrayLike | None = None
) -> dict[str, float]:
    """Per-pair residual norm over the pair's masked geometry rows."""
    residuals = {}
    for pair in pairs:
        rows = pair.geometry_rows()
        residual = rig.evaluate(pair.c, theta)[rows] - pair.v[rows]
        residuals[pair.name] = float(np.linalg.norm(residual))
    return residuals


def unidentified_parameters(rig: Rig, pairs: Sequence[ExpressionPair]) -> list[int]:
    """
    Parameters an unregularized fit on these pairs cannot determine, either
    because no residual depends on them or because they lie in a null space.
    """
    factors = np.array([rig.factors(pair.check(rig).c) for pair in pairs])
    observed = np.array([pair.row_selector() for pair in pairs])
    observed &= np.array([pair.weight > 0 for pair in pairs])[:, None]

    unidentified = []
    for row, params in enumerate(_row_groups(rig)):
        if params.size == 0:
            continue
        design = factors[observed[:, row]][:, rig.param_factors[params]]
        unidentified.extend(_null_parameters(design, params))
    return sorted(unidentified)
