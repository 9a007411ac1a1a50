from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rig_tuner.rigs import Rig, RigParams
from rig_tuner.utils.errors import RigContractError

from .filter_mask import FilterMask


@dataclass(frozen=True, eq=False)
class DecimatedProblem:
    """
    Rig restricted to the active controls of a mask.

    factors are the parent factor columns whose controls are all active,
    theta_indices the parent parameters living in those columns (theta_D),
    in the sub-rig's parameter order.
    """

    rig: Rig
    mask: FilterMask
    factors: NDArray[np.int64]
    theta_indices: NDArray[np.int64]

    def sub_theta(self, theta: ArrayLike) -> RigParams:
        return np.asarray(theta, dtype=np.float64)[self.theta_indices]

    def embed_theta(self, theta: ArrayLike, theta_decimated: ArrayLike) -> RigParams:
        full = np.array(theta, dtype=np.float64)
        full[self.theta_indices] = theta_decimated
        return full

    def embed_controls(self, c_decimated: ArrayLike) -> NDArray:
        return self.mask.embed(c_decimated)


def decimate_problem(rig: Rig, mask: FilterMask) -> DecimatedProblem:
    mask.check(rig.n_controls)
    if mask.is_empty:
        _error_msg = "Cannot decimate a rig with an empty control mask"
        raise RigContractError(_error_msg)

    active = set(mask.indices.tolist())
    factors = np.array(
        [f for f in range(rig.n_factors) if set(rig.factor_controls(f)) <= active],
        dtype=np.int64,
    )
    theta_indices = rig.params_of_factors(factors)
    if theta_indices.size == 0:
        _error_msg = "No rig parameter is reachable from the active controls"
        raise RigContractError(_error_msg)

    return DecimatedProblem(
        rig=rig.restricted_to(factors, mask.indices),
        mask=mask,
        factors=factors,
        theta_indices=theta_indices,
    )
