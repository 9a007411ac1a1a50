from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rig_tuner.utils.errors import RigContractError

from .rig import Rig, as_vector
from .types import ControlVector, GeometryVector, IndexSet


class LinearRig(Rig):
    """
    Linear rig v = A(theta) c + neutral_offset, with theta the row-major
    entries of the m x n matrix A.
    """

    def __init__(
        self,
        n_controls: int,
        m_geometry: int,
        theta: ArrayLike,
        neutral_offset: ArrayLike | None = None,
        control_names: Sequence[str] | None = None,
    ):
        super().__init__(n_controls, m_geometry, theta, control_names)
        if self.n_params != n_controls * m_geometry:
            _error_msg = (
                f"Linear rig theta length {self.n_params} does not match "
                f"{m_geometry} x {n_controls}"
            )
            raise RigContractError(_error_msg)

        if neutral_offset is None:
            self._offset = np.zeros(m_geometry)
        else:
            self._offset = as_vector(neutral_offset, "neutral_offset", m_geometry).copy()
        self._offset.setflags(write=False)

        self._rows = np.repeat(np.arange(m_geometry), n_controls)
        self._factors = np.tile(np.arange(n_controls), m_geometry)

    @classmethod
    def from_matrix(
        cls,
        a_matrix: ArrayLike,
        neutral_offset: ArrayLike | None = None,
        control_names: Sequence[str] | None = None,
    ) -> LinearRig:
        a_matrix = np.atleast_2d(np.asarray(a_matrix, dtype=np.float64))
        m, n = a_matrix.shape
        return cls(n, m, a_matrix.ravel(), neutral_offset, control_names)

    @property
    def neutral_offset(self) -> GeometryVector:
        return self._offset

    @property
    def n_factors(self) -> int:
        return self.n_controls

    @property
    def param_rows(self) -> IndexSet:
        return self._rows

    @property
    def param_factors(self) -> IndexSet:
        return self._factors

    def factor_controls(self, factor: int) -> tuple[int, ...]:
        return (int(factor),)

    def factors(self, c: ControlVector) -> NDArray:
        return c

    def factor_jacobian(self, c: ControlVector) -> NDArray:
        return np.eye(c.shape[0])

    def a_matrix(self, theta: ArrayLike | None = None) -> NDArray:
        return self.check_theta(theta).reshape(self.m_geometry, self.n_controls)

    def evaluate(self, c: ArrayLike, theta: ArrayLike | None = None) -> GeometryVector:
        c = self.check_controls(c)
        return self.a_matrix(theta) @ c + self._offset

    def jacobian_controls(self, c: ArrayLike, theta: ArrayLike | None = None) -> NDArray:
        self.check_controls(c)
        return self.a_matrix(theta).copy()

    def with_theta(self, theta: ArrayLike) -> LinearRig:
        return LinearRig(
            self.n_controls,
            self.m_geometry,
            self.check_theta(theta),
            self._offset,
            self.control_names,
        )

    def restricted_to(self, factors: IndexSet, controls: IndexSet) -> LinearRig:
        controls = np.asarray(controls, dtype=np.int64)
        return LinearRig.from_matrix(
            self.a_matrix()[:, controls],
            self._offset,
            [self.control_names[i] for i in controls],
        )

    def __repr__(self):
        return f"LinearRig(m={self.m_geometry}, n={self.n_controls})"
