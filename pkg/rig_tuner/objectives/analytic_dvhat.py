"""
Closed-form dv_hat/dtheta for trackers that perturb the exact inverse of a
linear rig, with theta the row-major entries of A_hat.

additive:    v_hat = v + A_hat c_tilde       -> kron(I, c_tilde^T)
rig scaled:  v_hat = v + A_hat^2 c_tilde
             -> A_hat kron(I, c_tilde^T) + kron(I, (A_hat c_tilde)^T)
"""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rig_tuner.rigs import LinearRig
from rig_tuner.trackers import ControlPerturbation, PerturbationMode
from rig_tuner.utils.errors import RigContractError

AnalyticDvhat = Callable[[NDArray, NDArray], NDArray]


def analytic_dvhat_additive(c_tilde: ArrayLike, m_geometry: int) -> NDArray:
    c_tilde = np.asarray(c_tilde, dtype=np.float64)
    return np.kron(np.eye(m_geometry), c_tilde[np.newaxis, :])


def analytic_dvhat_rig_scaled(a_hat: ArrayLike, c_tilde: ArrayLike) -> NDArray:
    a_hat = np.asarray(a_hat, dtype=np.float64)
    c_tilde = np.asarray(c_tilde, dtype=np.float64)
    m = a_hat.shape[0]
    return a_hat @ analytic_dvhat_additive(c_tilde, m) + analytic_dvhat_additive(a_hat @ c_tilde, m)


def make_analytic_dvhat(rig: LinearRig, perturbation: ControlPerturbation) -> AnalyticDvhat:
    """
    Returns f(v, theta_T) -> dv_hat/dtheta (m x n_params) for the perturbed
    tracker built on rig.
    """
    if not isinstance(rig, LinearRig):
        _error_msg = "Closed-form dv_hat/dtheta is only available for linear rigs"
        raise RigContractError(_error_msg)

    def dvhat(v: NDArray, theta_T: NDArray) -> NDArray:
        c_tilde = perturbation.c_tilde(np.asarray(v, dtype=np.float64))
        if perturbation.mode == PerturbationMode.T1_ADDITIVE:
            return analytic_dvhat_additive(c_tilde, rig.m_geometry)
        return analytic_dvhat_rig_scaled(rig.a_matrix(theta_T), c_tilde)

    return dvhat


def diagnostic_lvhat(estimates: Sequence[ArrayLike], analytic: Sequence[ArrayLike]) -> float:
    """Sum over pairs of the squared Frobenius error of dv_hat/dtheta estimates."""
    if len(estimates) != len(analytic):
        _error_msg = f"Got {len(estimates)} estimates for {len(analytic)} analytic matrices"
        raise RigContractError(_error_msg)
    total = 0.0
    for est, exact in zip(estimates, analytic, strict=True):
        est = np.asarray(est, dtype=np.float64)
        exact = np.asarray(exact, dtype=np.float64)
        if est.shape != exact.shape:
            _error_msg = f"Estimate of shape {est.shape} does not match {exact.shape}"
            raise RigContractError(_error_msg)
        total += float(np.sum((est - exact) ** 2))
    return total
