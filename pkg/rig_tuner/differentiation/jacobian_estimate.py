from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rig_tuner.rigs.rig import as_vector
from rig_tuner.utils.errors import NonFiniteError, RigContractError

GeometryFunction = Callable[[NDArray], NDArray]

UNIT_NORM_TOL = 1e-10


@dataclass(eq=False)
class JacobianEstimate:
    """
    Running estimate of du/dtheta (m x |theta_active|) around anchor_theta.
    """

    matrix: NDArray
    anchor_theta: NDArray
    update_count: int = 0
    last_step: float | None = None

    def __post_init__(self):
        self.matrix = np.array(self.matrix, dtype=np.float64)
        self.anchor_theta = as_vector(self.anchor_theta, "anchor theta").copy()
        if self.matrix.ndim != 2 or self.matrix.shape[1] != self.anchor_theta.shape[0]:
            _error_msg = (
                f"Jacobian estimate of shape {self.matrix.shape} does not match "
                f"{self.anchor_theta.shape[0]} parameters"
            )
            raise RigContractError(_error_msg)

    @classmethod
    def zeros(cls, m_geometry: int, anchor_theta: ArrayLike) -> JacobianEstimate:
        anchor_theta = as_vector(anchor_theta, "anchor theta")
        return cls(np.zeros((m_geometry, anchor_theta.shape[0])), anchor_theta)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def copy(self) -> JacobianEstimate:
        return JacobianEstimate(
            self.matrix.copy(), self.anchor_theta.copy(), self.update_count, self.last_step
        )

    def reanchored(self, anchor_theta: ArrayLike) -> JacobianEstimate:
        """
        Same matrix at a new anchor, used as the warm start of the next step.
        """
        anchor_theta = as_vector(anchor_theta, "anchor theta", self.matrix.shape[1])
        return JacobianEstimate(
            self.matrix.copy(), anchor_theta, self.update_count, self.last_step
        )


def evaluate_finite(u_eval: GeometryFunction, theta: NDArray) -> NDArray:
    u = np.asarray(u_eval(theta), dtype=np.float64)
    if not np.all(np.isfinite(u)):
        _error_msg = "Function evaluation returned non-finite values"
        raise NonFiniteError(_error_msg, theta)
    return u


def check_direction(direction: ArrayLike, n_params: int) -> NDArray:
    direction = as_vector(direction, "direction", n_params)
    if abs(np.linalg.norm(direction) - 1.0) > UNIT_NORM_TOL:
        _error_msg = f"Secant direction must be unit norm, got {np.linalg.norm(direction)}"
        raise RigContractError(_error_msg)
    return direction


def forward_difference(
    u_eval: GeometryFunction,
    anchor: NDArray,
    direction: NDArray,
    s: float,
    u_anchor: NDArray | None = None,
) -> NDArray:
    if not s > 0:
        _error_msg = f"Finite difference step must be positive, got {s}"
        raise RigContractError(_error_msg)
    if u_anchor is None:
        u_anchor = evaluate_finite(u_eval, anchor)
    return (evaluate_finite(u_eval, anchor + s * direction) - u_anchor) / s


def apply_secant(
    est: JacobianEstimate, direction: NDArray, difference: NDArray, s: float
) -> JacobianEstimate:
    """
    Broyden rank-one correction making est @ direction equal the difference
    quotient while leaving est unchanged on the orthogonal complement.
    """
    if difference.shape != (est.matrix.shape[0],):
        _error_msg = (
            f"Difference of length {difference.shape} does not match "
            f"{est.matrix.shape[0]} geometry rows"
        )
        raise RigContractError(_error_msg)
    correction = np.outer(difference - est.matrix @ direction, direction)
    return JacobianEstimate(
        est.matrix + correction, est.anchor_theta, est.update_count + 1, float(s)
    )


def secant_update(
    est: JacobianEstimate,
    u_eval: GeometryFunction,
    direction: ArrayLike,
    s: float,
    u_anchor: NDArray | None = None,
) -> JacobianEstimate:
    direction = check_direction(direction, est.matrix.shape[1])
    difference = forward_difference(u_eval, est.anchor_theta, direction, s, u_anchor)
    return apply_secant(est, direction, difference, s)
