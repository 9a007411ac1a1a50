from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from numpy.typing import ArrayLike, NDArray

from rig_tuner.utils.errors import RigContractError

from .types import ControlVector, GeometryVector, IndexSet, RigParams


def as_vector(values: ArrayLike, name: str, length: int | None = None) -> NDArray:
    vector = np.asarray(values, dtype=np.float64)
    if vector.ndim == 0:
        vector = vector.reshape(1)
    if vector.ndim != 1:
        _error_msg = f"{name} must be a vector, got shape {vector.shape}"
        raise RigContractError(_error_msg)
    if length is not None and vector.shape[0] != length:
        _error_msg = f"{name} length {vector.shape[0]} does not match expected {length}"
        raise RigContractError(_error_msg)
    if not np.all(np.isfinite(vector)):
        _error_msg = f"{name} contains non-finite values"
        raise RigContractError(_error_msg)
    return vector


class Rig(ABC):
    """
    Parametric rig R(c; theta) mapping animation controls to geometry.

    Every rig is linear in theta: each parameter sits at one geometry row and
    multiplies one "factor" of the controls (the control itself for linear
    rigs, a PSD product for joint rigs). param_rows / param_factors describe
    that layout and drive the generic parameter Jacobian, fitting and
    decimation code.

    Rigs are immutable. Evaluation methods accept an optional theta override so
    that optimizers can evaluate candidate parameters without copying the rig.
    """

    def __init__(
        self,
        n_controls: int,
        m_geometry: int,
        theta: ArrayLike,
        control_names: Sequence[str] | None = None,
    ):
        if n_controls < 1 or m_geometry < 1:
            _error_msg = f"Invalid rig dimensions n={n_controls}, m={m_geometry}"
            raise RigContractError(_error_msg)

        self._n_controls = int(n_controls)
        self._m_geometry = int(m_geometry)
        self._theta = as_vector(theta, "theta").copy()
        self._theta.setflags(write=False)

        if control_names is None:
            control_names = [f"control_{i}" for i in range(n_controls)]
        control_names = tuple(str(name) for name in control_names)
        if len(control_names) != n_controls:
            _error_msg = f"Expected {n_controls} control names, got {len(control_names)}"
            raise RigContractError(_error_msg)
        if len(set(control_names)) != n_controls:
            _error_msg = "Control names must be unique"
            raise RigContractError(_error_msg)
        self._control_names = control_names
        self._control_index = {name: i for i, name in enumerate(control_names)}

    @property
    def n_controls(self) -> int:
        return self._n_controls

    @property
    def m_geometry(self) -> int:
        return self._m_geometry

    @property
    def theta(self) -> RigParams:
        return self._theta

    @property
    def n_params(self) -> int:
        return self._theta.shape[0]

    @property
    def control_names(self) -> tuple[str, ...]:
        return self._control_names

    @property
    @abstractmethod
    def n_factors(self) -> int:
        pass

    @property
    @abstractmethod
    def param_rows(self) -> IndexSet:
        """Geometry row of every parameter."""

    @property
    @abstractmethod
    def param_factors(self) -> IndexSet:
        """Factor (control or PSD column) multiplied by every parameter."""

    @abstractmethod
    def factor_controls(self, factor: int) -> tuple[int, ...]:
        """Controls whose product forms the factor."""

    @abstractmethod
    def factors(self, c: ControlVector) -> NDArray:
        pass

    @abstractmethod
    def factor_jacobian(self, c: ControlVector) -> NDArray:
        """Derivative of the factor vector with respect to the controls (n_factors x n)."""

    @abstractmethod
    def with_theta(self, theta: ArrayLike) -> Rig:
        pass

    @abstractmethod
    def restricted_to(self, factors: IndexSet, controls: IndexSet) -> Rig:
        """
        Sub-rig using only the given factor columns, re-indexed on the given
        controls. Parameters follow the parent's ordering.
        """

    @property
    def neutral_offset(self) -> GeometryVector:
        return np.zeros(self._m_geometry)

    def control_index(self, name: str) -> int:
        try:
            return self._control_index[name]
        except KeyError:
            _error_msg = f"Unknown control name '{name}'"
            raise RigContractError(_error_msg) from None

    def controls_from_dict(self, activations: Mapping[str, float]) -> ControlVector:
        c = np.zeros(self._n_controls)
        for name, value in activations.items():
            c[self.control_index(name)] = float(value)
        return c

    def controls_to_dict(self, c: ControlVector, tol: float = 0.0) -> dict[str, float]:
        c = self.check_controls(c)
        return {
            name: float(value)
            for name, value in zip(self._control_names, c, strict=True)
            if abs(value) > tol
        }

    def check_controls(self, c: ArrayLike) -> ControlVector:
        return as_vector(c, "controls", self._n_controls)

    def check_geometry(self, v: ArrayLike) -> GeometryVector:
        return as_vector(v, "geometry", self._m_geometry)

    def check_theta(self, theta: ArrayLike | None) -> RigParams:
        if theta is None:
            return self._theta
        return as_vector(theta, "theta", self.n_params)

    def factor_matrix(self, theta: ArrayLike | None = None) -> sp.csc_matrix:
        """Sparse m x n_factors matrix whose nonzeros are theta."""
        theta = self.check_theta(theta)
        return sp.csc_matrix(
            (theta, (self.param_rows, self.param_factors)),
            shape=(self._m_geometry, self.n_factors),
        )

    def evaluate(self, c: ArrayLike, theta: ArrayLike | None = None) -> GeometryVector:
        c = self.check_controls(c)
        return self.factor_matrix(theta) @ self.factors(c) + self.neutral_offset

    def jacobian_controls(
        self, c: ArrayLike, theta: ArrayLike | None = None
    ) -> NDArray:
        c = self.check_controls(c)
        return np.asarray(self.factor_matrix(theta) @ self.factor_jacobian(c))

    def jacobian_params(self, c: ArrayLike) -> sp.csc_matrix:
        """
        Sparse m x |theta| Jacobian. The column of theta_l holds the factor it
        multiplies, placed at the geometry row it occupies.
        """
        c = self.check_controls(c)
        values = self.factors(c)[self.param_factors]
        return sp.csc_matrix(
            (values, (self.param_rows, np.arange(self.n_params))),
            shape=(self._m_geometry, self.n_params),
        )

    def params_of_factors(self, factors: Iterable[int]) -> IndexSet:
        """Parameter indices located in the given factor columns, in theta order."""
        selected = np.isin(self.param_factors, np.fromiter(factors, dtype=np.int64))
        return np.flatnonzero(selected)

    def params_of_controls(self, controls: Iterable[int]) -> IndexSet:
        """Parameters in every factor column touching one of the controls."""
        controls = set(controls)
        factors = [
            f for f in range(self.n_factors) if controls & set(self.factor_controls(f))
        ]
        return self.params_of_factors(factors)
