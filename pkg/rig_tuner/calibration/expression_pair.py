from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rig_tuner.rigs.rig import as_vector
from rig_tuner.utils.errors import RigContractError

if TYPE_CHECKING:
    from rig_tuner.rigs import ControlVector, GeometryVector, IndexSet, Rig

ACTIVATION_TOL = 1e-9


class PairKind(Enum):
    CAPTURED = "captured"
    CONSTRAINT = "constraint"
    SURROGATE = "surrogate"


@dataclass(frozen=True, eq=False)
class ExpressionPair:
    """
    Named (controls, geometry) pair.

    geometry_mask restricts fitting and objective residuals to the listed
    geometry rows. control_mask flags the controls the expression is meant to
    activate; when absent it is derived from the nonzero entries of c.
    """

    name: str
    c: ControlVector
    v: GeometryVector
    kind: PairKind = PairKind.CAPTURED
    geometry_mask: IndexSet | None = None
    weight: float = 1.0
    control_mask: NDArray[np.bool_] | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "c", as_vector(self.c, f"{self.name} controls"))
        object.__setattr__(self, "v", as_vector(self.v, f"{self.name} geometry"))
        object.__setattr__(self, "kind", PairKind(self.kind))

        if not np.isfinite(self.weight) or self.weight < 0:
            _error_msg = f"Pair '{self.name}' has invalid weight {self.weight}"
            raise RigContractError(_error_msg)

        if self.geometry_mask is not None:
            mask = np.unique(np.asarray(self.geometry_mask, dtype=np.int64))
            if mask.size == 0:
                _error_msg = f"Pair '{self.name}' has an empty geometry mask"
                raise RigContractError(_error_msg)
            if mask[0] < 0 or mask[-1] >= self.v.shape[0]:
                _error_msg = f"Pair '{self.name}' geometry mask exceeds {self.v.shape[0]} rows"
                raise RigContractError(_error_msg)
            object.__setattr__(self, "geometry_mask", mask)

        if self.control_mask is not None:
            mask = np.asarray(self.control_mask, dtype=bool)
            if mask.shape != self.c.shape:
                _error_msg = f"Pair '{self.name}' control mask does not match its controls"
                raise RigContractError(_error_msg)
            object.__setattr__(self, "control_mask", mask)

    @property
    def is_captured(self) -> bool:
        return self.kind == PairKind.CAPTURED

    def expression_controls(self) -> NDArray[np.bool_]:
        if self.control_mask is not None:
            return self.control_mask
        return np.abs(self.c) > ACTIVATION_TOL

    def geometry_rows(self) -> IndexSet:
        if self.geometry_mask is None:
            return np.arange(self.v.shape[0])
        return self.geometry_mask

    def row_selector(self) -> NDArray[np.bool_]:
        selector = np.zeros(self.v.shape[0], dtype=bool)
        selector[self.geometry_rows()] = True
        return selector

    def check(self, rig: Rig) -> ExpressionPair:
        if self.c.shape[0] != rig.n_controls or self.v.shape[0] != rig.m_geometry:
            _error_msg = (
                f"Pair '{self.name}' has dimensions ({self.c.shape[0]}, {self.v.shape[0]}) "
                f"but rig expects ({rig.n_controls}, {rig.m_geometry})"
            )
            raise RigContractError(_error_msg)
        return self

    def replace(self, **changes) -> ExpressionPair:
        return dataclasses.replace(self, **changes)


def augment_controls(
    c: ArrayLike, tracker_output: ArrayLike, activation_tol: float = ACTIVATION_TOL
) -> ControlVector:
    """
    Keep the nonzero entries of c and fill the others from the tracker output.
    """
    c = as_vector(c, "controls")
    tracker_output = as_vector(tracker_output, "tracker output", c.shape[0])
    return np.where(np.abs(c) > activation_tol, c, tracker_output)


def augment_pair(
    pair: ExpressionPair,
    tracker_output: ArrayLike,
    activation_tol: float = ACTIVATION_TOL,
) -> ExpressionPair:
    """
    Replace c by c+ while keeping the expression's own controls flagged.
    """
    return pair.replace(
        c=augment_controls(pair.c, tracker_output, activation_tol),
        control_mask=pair.expression_controls().copy(),
    )


def mask_geometry(pair: ExpressionPair, mask: ArrayLike) -> ExpressionPair:
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        _error_msg = f"Empty geometry mask for pair '{pair.name}'"
        raise RigContractError(_error_msg)
    return pair.replace(geometry_mask=mask)
