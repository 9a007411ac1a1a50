from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, DTypeLike

from rig_tuner.rigs import ControlVector, GeometryVector, LinearRig, Rig
from rig_tuner.rigs.rig import as_vector
from rig_tuner.utils.errors import RigContractError

from .direct_tracker import track_direct
from .solve_mode import DEFAULT_SOLVE_MODE, SolveMode
from .tracker import Tracker, TrackerCapabilities


class PerturbationMode(Enum):
    T1_ADDITIVE = "t1_additive"
    T2_RIG_SCALED = "t2_rig_scaled"


@dataclass(frozen=True)
class ControlPerturbation:
    """
    Imperfect inversion c_tilde(v) added to the exact tracker output, either
    directly (T1) or scaled by the tracker's rig matrix (T2).
    """

    mode: PerturbationMode
    c_tilde: Callable[[GeometryVector], ControlVector]

    @classmethod
    def constant(cls, mode: PerturbationMode, c_tilde: ArrayLike) -> ControlPerturbation:
        value = as_vector(c_tilde, "c_tilde").copy()
        return cls(mode, lambda _v: value)

    @classmethod
    def lookup(
        cls,
        mode: PerturbationMode,
        geometries: Sequence[ArrayLike],
        c_tildes: Sequence[ArrayLike],
        atol: float = 1e-12,
    ) -> ControlPerturbation:
        """
        Per-pair perturbation: returns the c_tilde registered for a geometry,
        zero for unknown geometries.
        """
        table = [
            (np.asarray(v, dtype=np.float64), as_vector(c, "c_tilde").copy())
            for v, c in zip(geometries, c_tildes, strict=True)
        ]
        size = table[0][1].shape[0] if table else 0

        def c_tilde(v):
            v = np.asarray(v, dtype=np.float64)
            for known_v, known_c in table:
                if known_v.shape == v.shape and np.allclose(known_v, v, rtol=0, atol=atol):
                    return known_c
            return np.zeros(size)

        return cls(mode, c_tilde)


def track_perturbed(
    rig: Rig,
    v: ArrayLike,
    perturbation: ControlPerturbation,
    solve_mode: SolveMode = DEFAULT_SOLVE_MODE,
    theta: ArrayLike | None = None,
) -> ControlVector:
    v = rig.check_geometry(v)
    c = track_direct(rig, v, solve_mode, theta)
    c_tilde = as_vector(perturbation.c_tilde(v), "c_tilde", rig.n_controls)
    if perturbation.mode == PerturbationMode.T1_ADDITIVE:
        return c + c_tilde

    if not isinstance(rig, LinearRig) or rig.n_controls != rig.m_geometry:
        _error_msg = "Rig-scaled perturbation requires a square linear rig"
        raise RigContractError(_error_msg)
    return c + rig.a_matrix(theta) @ c_tilde


class PerturbedTracker(Tracker):
    """
    Tracker that does not precisely invert its rig.

    control_dtype is the precision the controls are reported at; float32
    mimics a tracker exporting animation curves in single precision.
    """

    def __init__(
        self,
        rig: Rig,
        perturbation: ControlPerturbation,
        solve_mode: SolveMode = DEFAULT_SOLVE_MODE,
        control_dtype: DTypeLike = np.float64,
    ):
        self._rig = rig
        self._perturbation = perturbation
        self._solve_mode = solve_mode
        self._control_dtype = np.dtype(control_dtype)
        if self._control_dtype.kind != "f":
            _error_msg = f"Controls must be reported as floats, got {self._control_dtype}"
            raise RigContractError(_error_msg)

    @property
    def control_dtype(self) -> np.dtype:
        return self._control_dtype

    def reporting_at(self, control_dtype: DTypeLike) -> PerturbedTracker:
        return PerturbedTracker(self._rig, self._perturbation, self._solve_mode, control_dtype)

    @property
    def n_controls(self) -> int:
        return self._rig.n_controls

    @property
    def capabilities(self) -> TrackerCapabilities:
        return TrackerCapabilities(exposes_internals=True)

    def track(self, v: ArrayLike, theta_T: ArrayLike) -> ControlVector:
        c = track_perturbed(self._rig, v, self._perturbation, self._solve_mode, theta_T)
        return c.astype(self._control_dtype).astype(np.float64)
