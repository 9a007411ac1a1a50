"""
Embedded data of the small linear examples. Matrices store one pair per
column: C holds controls, V the matching geometry.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from rig_tuner.calibration import ExpressionPair
from rig_tuner.utils.errors import RigContractError

# Scalar example: one pair (c, v) = (1, -1) for the rig A = [-1], started at 1.
SCALAR_A = np.array([[-1.0]])
SCALAR_C = np.array([[1.0]])
SCALAR_V = np.array([[-1.0]])
SCALAR_A_INIT = np.array([[1.0]])

# 2 x 2 example, A C = V with A = -I.
SQUARE_A = -np.eye(2)
SQUARE_C = np.array([[1.0, 1.0], [2.0, 1.0]])
SQUARE_V = np.array([[-1.0, -1.0], [-2.0, -1.0]])
SQUARE_A_INIT = np.eye(2)
SQUARE_A_INIT_OFF_DIAGONAL = np.array([[1.0, 1.0], [0.0, 1.0]])

# 3 x 3 rig and four consistent pairs.
A = np.diag([-1.0, 2.0, -2.0 / 3.0])
C = np.array(
    [
        [1.0, 2.0, 3.0, 1.0],
        [2.0, -1.0, 1.0, 1.0],
        [3.0, -1.0, -2.0, 1.0],
    ]
)
V = np.array(
    [
        [-1.0, -2.0, -3.0, -1.0],
        [4.0, -2.0, 2.0, 2.0],
        [-2.0, 2.0 / 3.0, 4.0 / 3.0, -2.0 / 3.0],
    ]
)

# V perturbed by about 1%, as printed with three significant digits.
V_HAT = np.array(
    [
        [-0.990, -2.00, -2.97, -1.00],
        [3.97, -1.98, 1.98, 2.01],
        [-1.98, 0.667, 1.33, -0.667],
    ]
)

A_INIT = np.eye(3)


def pairs_from_columns(
    c_matrix: ArrayLike, v_matrix: ArrayLike, prefix: str = "pair"
) -> list[ExpressionPair]:
    c_matrix = np.atleast_2d(np.asarray(c_matrix, dtype=np.float64))
    v_matrix = np.atleast_2d(np.asarray(v_matrix, dtype=np.float64))
    if c_matrix.shape[1] != v_matrix.shape[1]:
        _error_msg = (
            f"Got {c_matrix.shape[1]} control columns for {v_matrix.shape[1]} geometry columns"
        )
        raise RigContractError(_error_msg)
    return [
        ExpressionPair(f"{prefix} {k + 1}", c_matrix[:, k], v_matrix[:, k])
        for k in range(c_matrix.shape[1])
    ]


def first_columns(matrix: NDArray, count: int) -> NDArray:
    return np.array(matrix[:, :count])


def completed_fit(c_matrix: ArrayLike, v_matrix: ArrayLike, a_matrix: ArrayLike) -> NDArray:
    """
    Least-squares rig from two pairs in three dimensions, completed by a third
    pair along c1 x c2 whose geometry comes from a_matrix. The result matches
    the minimum-norm fit on the two given pairs and a_matrix on the direction
    they leave free.
    """
    c_matrix = np.asarray(c_matrix, dtype=np.float64)
    v_matrix = np.asarray(v_matrix, dtype=np.float64)
    a_matrix = np.asarray(a_matrix, dtype=np.float64)
    if c_matrix.shape != (3, 2) or v_matrix.shape[1] != 2:
        _error_msg = "Completion needs exactly two pairs of three controls"
        raise RigContractError(_error_msg)

    c_free = np.cross(c_matrix[:, 0], c_matrix[:, 1])
    c_full = np.column_stack([c_matrix, c_free])
    v_full = np.column_stack([v_matrix, a_matrix @ c_free])
    a_transposed = scipy.linalg.lstsq(c_full.T, v_full.T)[0]
    return a_transposed.T


def perturbation_columns(count: int = 3) -> NDArray:
    """C_tilde = A^-1 (V_hat - V), control offsets mimicking the geometry perturbation."""
    return scipy.linalg.solve(A, first_columns(V_HAT, count) - first_columns(V, count))

