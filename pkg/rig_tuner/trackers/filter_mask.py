from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rig_tuner.utils.errors import RigContractError


@dataclass(frozen=True, eq=False)
class FilterMask:
    """
    Diagonal Heaviside filter H over the controls. decimation_matrix is the
    active-row selector H_D, with H = H_D^T H_D.
    """

    active: NDArray[np.bool_]

    def __post_init__(self):
        active = np.array(self.active, dtype=bool)
        if active.ndim != 1:
            _error_msg = "FilterMask expects a boolean vector"
            raise RigContractError(_error_msg)
        active.setflags(write=False)
        object.__setattr__(self, "active", active)

    @classmethod
    def all_active(cls, n_controls: int) -> FilterMask:
        return cls(np.ones(n_controls, dtype=bool))

    @classmethod
    def from_indices(cls, indices: Iterable[int], n_controls: int) -> FilterMask:
        active = np.zeros(n_controls, dtype=bool)
        active[list(indices)] = True
        return cls(active)

    @classmethod
    def from_controls(cls, c: ArrayLike, tol: float = 1e-9) -> FilterMask:
        return cls(np.abs(np.asarray(c, dtype=np.float64)) > tol)

    @property
    def n_controls(self) -> int:
        return self.active.shape[0]

    @property
    def indices(self) -> NDArray[np.int64]:
        return np.flatnonzero(self.active)

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    @property
    def is_empty(self) -> bool:
        return self.n_active == 0

    @property
    def h_matrix(self) -> NDArray:
        return np.diag(self.active.astype(np.float64))

    @property
    def decimation_matrix(self) -> NDArray:
        return np.eye(self.n_controls)[self.indices]

    def check(self, n_controls: int) -> FilterMask:
        if self.n_controls != n_controls:
            _error_msg = f"Mask length {self.n_controls} does not match {n_controls} controls"
            raise RigContractError(_error_msg)
        return self

    def apply(self, c: ArrayLike) -> NDArray:
        return np.where(self.active, np.asarray(c, dtype=np.float64), 0.0)

    def decimate(self, c: ArrayLike) -> NDArray:
        return np.asarray(c, dtype=np.float64)[self.indices]

    def embed(self, c_decimated: ArrayLike) -> NDArray:
        c = np.zeros(self.n_controls)
        c[self.indices] = c_decimated
        return c

    def complement(self) -> FilterMask:
        return FilterMask(~self.active)

    def __and__(self, other: FilterMask) -> FilterMask:
        return FilterMask(self.active & other.check(self.n_controls).active)

    def __or__(self, other: FilterMask) -> FilterMask:
        return FilterMask(self.active | other.check(self.n_controls).active)

    def __eq__(self, other):
        return isinstance(other, FilterMask) and np.array_equal(self.active, other.active)

    def __hash__(self):
        return hash(self.active.tobytes())
