from __future__ import annotations

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from rig_tuner.rigs import Rig
from rig_tuner.utils.errors import RigContractError, SingularMatrixError

from .jacobian_estimate import JacobianEstimate


def solve_dT_dtheta(  # noqa: N802
    rig: Rig,
    c: ArrayLike,
    dvhat_dtheta: JacobianEstimate | NDArray | None,
    theta_T: ArrayLike,
    reg_eps: float = 0.0,
    active_theta: ArrayLike | None = None,
    control_mask: ArrayLike | None = None,
) -> NDArray:
    """
    Solve dR/dc . dT/dtheta = -dR/dtheta + dv_hat/dtheta through the
    pseudo-inverse of the normal equations.

    control_mask restricts the unknowns to the masked controls (filtered and
    decimated trackers); other rows of the result are zero. reg_eps appends
    eps I dT/dtheta = 0 rows. dvhat_dtheta None drops the tracker error term.
    """
    c = rig.check_controls(c)
    theta_T = rig.check_theta(theta_T)
    active = (
        np.arange(rig.n_params)
        if active_theta is None
        else np.asarray(active_theta, dtype=np.int64)
    )
    if reg_eps < 0:
        _error_msg = f"Regularization must be nonnegative, got {reg_eps}"
        raise RigContractError(_error_msg)

    rhs = -rig.jacobian_params(c)[:, active].toarray()
    if dvhat_dtheta is not None:
        dvhat = (
            dvhat_dtheta.matrix
            if isinstance(dvhat_dtheta, JacobianEstimate)
            else np.asarray(dvhat_dtheta, dtype=np.float64)
        )
        if dvhat.shape != rhs.shape:
            _error_msg = f"dv_hat/dtheta of shape {dvhat.shape} does not match {rhs.shape}"
            raise RigContractError(_error_msg)
        rhs = rhs + dvhat

    if control_mask is None:
        columns = np.arange(rig.n_controls)
    else:
        control_mask = np.asarray(control_mask, dtype=bool)
        if control_mask.shape != (rig.n_controls,):
            _error_msg = f"Control mask of shape {control_mask.shape} does not match rig"
            raise RigContractError(_error_msg)
        columns = np.flatnonzero(control_mask)

    result = np.zeros((rig.n_controls, active.shape[0]))
    if columns.size == 0:
        return result

    dr_dc = rig.jacobian_controls(c, theta_T)[:, columns]
    normal = dr_dc.T @ dr_dc
    if reg_eps > 0:
        normal += reg_eps**2 * np.eye(columns.size)
    elif np.linalg.matrix_rank(dr_dc) < columns.size:
        _error_msg = (
            f"Normal equations of the implicit tracker system are singular "
            f"(rank {np.linalg.matrix_rank(dr_dc)} < {columns.size}); use reg_eps > 0"
        )
        raise SingularMatrixError(_error_msg)

    result[columns] = scipy.linalg.pinvh(normal) @ (dr_dc.T @ rhs)
    return result
