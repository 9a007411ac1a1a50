from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from rig_tuner.calibration import ExpressionPair
from rig_tuner.rigs import RigParams
from rig_tuner.utils.errors import RigContractError


@dataclass(frozen=True, eq=False)
class DirectFitResult:
    theta_hat: RigParams
    loss: float
    rank_deficient: bool
    rank: int

    def a_matrix(self, m_geometry: int) -> NDArray:
        return self.theta_hat.reshape(m_geometry, -1)


def stack_pairs(pairs: Sequence[ExpressionPair]) -> tuple[NDArray, NDArray]:
    """Controls and geometry as column matrices C (n x K) and V (m x K)."""
    if not pairs:
        _error_msg = "Direct fit needs at least one pair"
        raise RigContractError(_error_msg)
    c_matrix = np.column_stack([pair.c for pair in pairs])
    v_matrix = np.column_stack([pair.v for pair in pairs])
    return c_matrix, v_matrix


def direct_loss(a_matrix: ArrayLike, pairs: Sequence[ExpressionPair]) -> float:
    """Sum over the rows of A of ||C^T A^T e_i - V^T e_i||^2."""
    c_matrix, v_matrix = stack_pairs(pairs)
    residual = np.asarray(a_matrix, dtype=np.float64) @ c_matrix - v_matrix
    return float(np.sum(residual**2))


def direct_fit(pairs: Sequence[ExpressionPair]) -> DirectFitResult:
    """
    Least-squares fit of a linear rig matrix to the stacked pairs, solving
    C^T A^T = V^T. Rank deficiency yields the minimum-norm solution, flagged.
    """
    c_matrix, v_matrix = stack_pairs(pairs)
    a_transposed, _, rank, _ = scipy.linalg.lstsq(c_matrix.T, v_matrix.T)
    a_matrix = a_transposed.T
    return DirectFitResult(
        theta_hat=a_matrix.ravel(),
        loss=direct_loss(a_matrix, pairs),
        rank_deficient=bool(rank < c_matrix.shape[0]),
        rank=int(rank),
    )
