from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from rig_tuner.utils.errors import NonFiniteError, RigContractError
from rig_tuner.utils.file_access import reject_unknown_fields

from .jacobian_estimate import (
    GeometryFunction,
    evaluate_finite,
    forward_difference,
)

DEFAULT_S_GRID: tuple[float, ...] = tuple(10.0**k for k in range(-7, 3))

# L_delta values within this fraction of the minimum count as ties. Zero keeps
# only exact ties, which resolve to the smallest s.
DEFAULT_TIE_RTOL = 0.0


@dataclass(frozen=True, eq=False)
class StepSelection:
    s_grid: tuple[float, ...]
    l_delta_profile: NDArray
    chosen_s: float
    differences: tuple[NDArray, ...]

    @property
    def interior_grid(self) -> tuple[float, ...]:
        return self.s_grid[1:-1]

    @property
    def chosen_index(self) -> int:
        return self.s_grid.index(self.chosen_s)

    @property
    def chosen_difference(self) -> NDArray:
        return self.differences[self.chosen_index]

    @property
    def chosen_l_delta(self) -> float:
        return float(self.l_delta_profile[self.chosen_index - 1])


def l_delta_profile(differences: Sequence[NDArray]) -> NDArray:
    """
    Sensitivity of each interior difference quotient to its neighbours on the
    grid. For a unit direction the one-direction update matrices differ by
    (fd_a - fd_b) d^T, whose Frobenius norm is ||fd_a - fd_b||.
    """
    profile = np.empty(len(differences) - 2)
    for i in range(1, len(differences) - 1):
        profile[i - 1] = np.linalg.norm(differences[i] - differences[i - 1]) + np.linalg.norm(
            differences[i] - differences[i + 1]
        )
    return profile


def select_step(
    u_eval: GeometryFunction,
    anchor: NDArray,
    direction: NDArray,
    grid: Sequence[float] = DEFAULT_S_GRID,
    u_anchor: NDArray | None = None,
    tie_rtol: float = DEFAULT_TIE_RTOL,
) -> StepSelection:
    grid = tuple(float(s) for s in grid)
    if len(grid) < 3:
        _error_msg = f"Step grid needs at least 3 entries, got {len(grid)}"
        raise RigContractError(_error_msg)
    if any(s <= 0 for s in grid) or any(b <= a for a, b in zip(grid, grid[1:], strict=False)):
        _error_msg = "Step grid must be positive and strictly increasing"
        raise RigContractError(_error_msg)

    anchor = np.asarray(anchor, dtype=np.float64)
    if u_anchor is None:
        u_anchor = evaluate_finite(u_eval, anchor)

    differences = []
    for s in grid:
        try:
            differences.append(forward_difference(u_eval, anchor, direction, s, u_anchor))
        except NonFiniteError:
            differences.append(np.full(u_anchor.shape, np.nan))

    profile = l_delta_profile(differences)
    if np.all(np.isnan(profile)):
        _error_msg = "Step sensitivity is undefined on the whole grid"
        raise NonFiniteError(_error_msg, anchor)

    best = int(np.nanargmin(profile))
    ties = np.flatnonzero(profile <= profile[best] * (1.0 + tie_rtol))
    chosen = int(ties[0]) + 1
    return StepSelection(grid, profile, grid[chosen], tuple(differences))


class StepMode(Enum):
    FIXED = "fixed"
    ADAPTIVE = "adaptive"
    FROZEN = "frozen"


@dataclass
class StepPolicy:
    """
    fixed uses s for every update, adaptive runs select_step for every
    direction, frozen selects once and reuses the step of the warm estimate.
    """

    mode: StepMode = StepMode.ADAPTIVE
    s: float = 1e-4
    grid: tuple[float, ...] = field(default=DEFAULT_S_GRID)
    tie_rtol: float = DEFAULT_TIE_RTOL

    def __post_init__(self):
        self.mode = StepMode(self.mode)
        self.grid = tuple(float(s) for s in self.grid)
        if not self.s > 0:
            _error_msg = f"Step must be positive, got {self.s}"
            raise RigContractError(_error_msg)

    @classmethod
    def fixed(cls, s: float) -> StepPolicy:
        return cls(StepMode.FIXED, s)

    @classmethod
    def adaptive(cls, grid: Sequence[float] = DEFAULT_S_GRID) -> StepPolicy:
        return cls(StepMode.ADAPTIVE, grid=tuple(grid))

    @classmethod
    def frozen(cls, grid: Sequence[float] = DEFAULT_S_GRID) -> StepPolicy:
        return cls(StepMode.FROZEN, grid=tuple(grid))

    @classmethod
    def from_dict(cls, content: dict) -> StepPolicy:
        reject_unknown_fields(cls, content)
        return cls(**content)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "s": self.s,
            "grid": list(self.grid),
            "tie_rtol": self.tie_rtol,
        }
