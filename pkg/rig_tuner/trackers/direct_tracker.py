from __future__ import annotations

import logging

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from rig_tuner.rigs import ControlVector, LinearRig, Rig
from rig_tuner.utils.errors import RigContractError, SingularMatrixError

from .decimation import DecimatedProblem
from .solve_mode import DEFAULT_SOLVE_MODE, SolveKind, SolveMode
from .tracker import Tracker, TrackerCapabilities

GAUSS_NEWTON_MAX_ITERS = 200
GAUSS_NEWTON_GRAD_TOL = 1e-10
GAUSS_NEWTON_MAX_HALVINGS = 40


def _solve_linear(a_matrix: NDArray, rhs: NDArray, mode: SolveMode) -> NDArray:
    if mode.kind == SolveKind.INVERSE:
        if a_matrix.shape[0] != a_matrix.shape[1]:
            _error_msg = f"Inverse solve requires a square rig matrix, got {a_matrix.shape}"
            raise RigContractError(_error_msg)
        try:
            return scipy.linalg.solve(a_matrix, rhs)
        except scipy.linalg.LinAlgError as e:
            _error_msg = f"Rig matrix is singular, inverse solve impossible ({e})"
            raise SingularMatrixError(_error_msg) from e

    if mode.kind == SolveKind.LEAST_SQUARES:
        return scipy.linalg.lstsq(a_matrix, rhs)[0]

    if mode.kind == SolveKind.MIN_NORM:
        return scipy.linalg.pinv(a_matrix) @ rhs

    normal = a_matrix.T @ a_matrix + mode.epsilon**2 * np.eye(a_matrix.shape[1])
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(normal), a_matrix.T @ rhs)
    except scipy.linalg.LinAlgError:
        return scipy.linalg.pinvh(normal) @ (a_matrix.T @ rhs)


def _gauss_newton(rig: Rig, v: NDArray, theta: NDArray, mode: SolveMode) -> NDArray:
    """
    Minimize ||R(c; theta) - v||^2 + eps^2 ||c||^2 by Gauss-Newton with step
    halving, starting from the solve restricted to the identity PSD columns.
    """
    eps2 = mode.epsilon**2 if mode.kind == SolveKind.LM else 0.0
    factor_matrix = rig.factor_matrix(theta)
    n = rig.n_controls

    linear_block = factor_matrix[:, :n].toarray()
    initial_mode = mode if mode.kind == SolveKind.LM else SolveMode.least_squares()
    c = _solve_linear(linear_block, v, initial_mode)

    def objective(controls):
        residual = factor_matrix @ rig.factors(controls) - v
        return residual @ residual + eps2 * controls @ controls, residual

    loss, residual = objective(c)
    for iteration in range(GAUSS_NEWTON_MAX_ITERS):
        jac = np.asarray(factor_matrix @ rig.factor_jacobian(c))
        grad = jac.T @ residual + eps2 * c
        if np.linalg.norm(grad) < GAUSS_NEWTON_GRAD_TOL:
            return c

        normal = jac.T @ jac + eps2 * np.eye(n)
        step = -scipy.linalg.lstsq(normal, grad)[0]
        scale = 1.0
        for _ in range(GAUSS_NEWTON_MAX_HALVINGS):
            candidate = c + scale * step
            candidate_loss, candidate_residual = objective(candidate)
            if candidate_loss < loss:
                break
            scale *= 0.5
        else:
            logging.debug("Gauss-Newton stalled at iteration %d, loss %g", iteration, loss)
            return c
        c, loss, residual = candidate, candidate_loss, candidate_residual

    logging.debug("Gauss-Newton reached %d iterations, loss %g", GAUSS_NEWTON_MAX_ITERS, loss)
    return c


def track_direct(
    rig: Rig,
    v: ArrayLike,
    solve_mode: SolveMode = DEFAULT_SOLVE_MODE,
    theta: ArrayLike | None = None,
) -> ControlVector:
    """
    Solve R(c; theta) = v for c. Linear rigs use the requested direct solve,
    other rigs a Gauss-Newton iteration on the same (optionally damped)
    least-squares problem.
    """
    v = rig.check_geometry(v)
    theta = rig.check_theta(theta)
    if isinstance(rig, LinearRig):
        return _solve_linear(rig.a_matrix(theta), v - rig.neutral_offset, solve_mode)
    return _gauss_newton(rig, v - rig.neutral_offset, theta, solve_mode)


class DirectTracker(Tracker):
    """
    Reference open-source tracker inverting the rig it is given.
    """

    def __init__(self, rig: Rig, solve_mode: SolveMode = DEFAULT_SOLVE_MODE):
        self._rig = rig
        self._solve_mode = solve_mode

    @property
    def rig(self) -> Rig:
        return self._rig

    @property
    def solve_mode(self) -> SolveMode:
        return self._solve_mode

    @property
    def n_controls(self) -> int:
        return self._rig.n_controls

    @property
    def capabilities(self) -> TrackerCapabilities:
        return TrackerCapabilities(supports_decimation=True, exposes_internals=True)

    def track(self, v: ArrayLike, theta_T: ArrayLike) -> ControlVector:
        return track_direct(self._rig, v, self._solve_mode, theta_T)

    def decimate(self, problem: DecimatedProblem) -> DirectTracker:
        return DirectTracker(problem.rig, self._solve_mode)
