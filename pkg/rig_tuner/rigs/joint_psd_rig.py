from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import scipy.sparse as sp
from numpy.typing import ArrayLike, NDArray

from rig_tuner.utils.errors import RigContractError

from .psd import PsdSpec, make_psd_spec, psd_expand, psd_jacobian
from .rig import Rig
from .types import ControlVector, IndexSet


class JointPsdRig(Rig):
    """
    Joint rig v = J(theta) psd(c).

    J is an m x p sparse joint matrix stored in compressed column layout whose
    nonzero values are theta, in column-major order. The sparsity pattern is
    fixed at construction. The first n PSD definitions are the identity
    expansion of the controls. primary_mask flags retarget-worthy controls
    against tweaker controls.
    """

    def __init__(
        self,
        n_controls: int,
        m_geometry: int,
        psd_spec: Sequence[Sequence[int]],
        rows: ArrayLike,
        cols: ArrayLike,
        theta: ArrayLike,
        primary_mask: ArrayLike | None = None,
        control_names: Sequence[str] | None = None,
    ):
        spec = make_psd_spec(psd_spec, n_controls)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        theta = np.asarray(theta, dtype=np.float64)
        if not (rows.shape == cols.shape == theta.shape) or rows.ndim != 1:
            _error_msg = "Sparsity rows, cols and theta must be vectors of equal length"
            raise RigContractError(_error_msg)
        if rows.size and (rows.min() < 0 or rows.max() >= m_geometry):
            _error_msg = f"Sparsity row index outside [0, {m_geometry})"
            raise RigContractError(_error_msg)
        if cols.size and (cols.min() < 0 or cols.max() >= len(spec)):
            _error_msg = f"Sparsity column index outside [0, {len(spec)})"
            raise RigContractError(_error_msg)

        order = np.lexsort((rows, cols))
        rows, cols, theta = rows[order], cols[order], theta[order]
        duplicated = (np.diff(rows) == 0) & (np.diff(cols) == 0)
        if np.any(duplicated):
            _error_msg = "Sparsity pattern contains duplicated entries"
            raise RigContractError(_error_msg)

        super().__init__(n_controls, m_geometry, theta, control_names)
        self._spec = spec
        self._rows = rows
        self._cols = cols
        self._rows.setflags(write=False)
        self._cols.setflags(write=False)

        if primary_mask is None:
            primary_mask = np.ones(n_controls, dtype=bool)
        primary_mask = np.array(primary_mask, dtype=bool)
        if primary_mask.shape != (n_controls,):
            _error_msg = f"primary_mask must have {n_controls} entries"
            raise RigContractError(_error_msg)
        self._primary_mask = primary_mask
        self._primary_mask.setflags(write=False)

    @classmethod
    def from_joint_matrix(
        cls,
        joint_matrix: sp.spmatrix | ArrayLike,
        psd_spec: Sequence[Sequence[int]],
        n_controls: int,
        primary_mask: ArrayLike | None = None,
        control_names: Sequence[str] | None = None,
    ) -> JointPsdRig:
        """
        Build from a matrix whose stored nonzeros define the sparsity pattern.
        """
        coo = sp.coo_matrix(joint_matrix)
        return cls(
            n_controls,
            coo.shape[0],
            psd_spec,
            coo.row,
            coo.col,
            coo.data,
            primary_mask,
            control_names,
        )

    @property
    def psd_spec(self) -> PsdSpec:
        return self._spec

    @property
    def p_psd(self) -> int:
        return len(self._spec)

    @property
    def primary_mask(self) -> NDArray:
        return self._primary_mask

    @property
    def sparsity(self) -> tuple[IndexSet, IndexSet]:
        return self._rows, self._cols

    @property
    def n_factors(self) -> int:
        return self.p_psd

    @property
    def param_rows(self) -> IndexSet:
        return self._rows

    @property
    def param_factors(self) -> IndexSet:
        return self._cols

    def factor_controls(self, factor: int) -> tuple[int, ...]:
        return self._spec[factor]

    def factors(self, c: ControlVector) -> NDArray:
        return psd_expand(self._spec, c)

    def factor_jacobian(self, c: ControlVector) -> NDArray:
        return psd_jacobian(self._spec, c)

    def joint_matrix(self, theta: ArrayLike | None = None) -> sp.csc_matrix:
        return self.factor_matrix(theta)

    def with_theta(self, theta: ArrayLike) -> JointPsdRig:
        return JointPsdRig(
            self.n_controls,
            self.m_geometry,
            self._spec,
            self._rows,
            self._cols,
            self.check_theta(theta),
            self._primary_mask,
            self.control_names,
        )

    def restricted_to(self, factors: IndexSet, controls: IndexSet) -> JointPsdRig:
        factors = np.asarray(factors, dtype=np.int64)
        controls = np.asarray(controls, dtype=np.int64)
        control_map = {int(c): i for i, c in enumerate(controls)}
        factor_map = {int(f): i for i, f in enumerate(factors)}
        params = self.params_of_factors(factors)
        return JointPsdRig(
            len(controls),
            self.m_geometry,
            [tuple(control_map[i] for i in self._spec[f]) for f in factors],
            self._rows[params],
            [factor_map[int(f)] for f in self._cols[params]],
            self.theta[params],
            self._primary_mask[controls],
            [self.control_names[i] for i in controls],
        )

    def __repr__(self):
        return (
            f"JointPsdRig(m={self.m_geometry}, n={self.n_controls}, "
            f"p={self.p_psd}, nnz={self.n_params})"
        )
