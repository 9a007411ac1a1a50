"""
Pose-space deformation (PSD) expansion.

A PSD definition is a subset of control indices. Its value is the product of
the controls in the subset, so the identity definitions (i,) forward the
control values and larger subsets form corrective combinations.
"""

from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rig_tuner.utils.errors import RigContractError

PsdSpec = tuple[tuple[int, ...], ...]


def make_psd_spec(definitions: Sequence[Sequence[int]], n_controls: int) -> PsdSpec:
    spec = tuple(tuple(int(i) for i in subset) for subset in definitions)
    if len(spec) < n_controls:
        _error_msg = f"PSD spec has {len(spec)} entries, fewer than {n_controls} controls"
        raise RigContractError(_error_msg)

    for j, subset in enumerate(spec):
        if not subset:
            _error_msg = f"PSD definition {j} references no control"
            raise RigContractError(_error_msg)
        if len(set(subset)) != len(subset):
            _error_msg = f"PSD definition {j} repeats a control: {subset}"
            raise RigContractError(_error_msg)
        if min(subset) < 0 or max(subset) >= n_controls:
            _error_msg = f"PSD definition {j} has an index outside [0, {n_controls})"
            raise RigContractError(_error_msg)
        if j < n_controls and subset != (j,):
            _error_msg = f"PSD definition {j} must be the identity expansion ({j},)"
            raise RigContractError(_error_msg)
    return spec


def psd_expand(spec: PsdSpec, c: ArrayLike) -> NDArray:
    c = np.asarray(c, dtype=np.float64)
    return np.array([np.prod(c[list(subset)]) for subset in spec])


def psd_jacobian(spec: PsdSpec, c: ArrayLike) -> NDArray:
    """
    d psd_j / d c_i is the product of the other controls of subset j when i
    belongs to it, zero otherwise.
    """
    c = np.asarray(c, dtype=np.float64)
    jac = np.zeros((len(spec), c.shape[0]))
    for j, subset in enumerate(spec):
        if len(subset) == 1:
            jac[j, subset[0]] = 1.0
            continue
        for i in subset:
            jac[j, i] = np.prod([c[k] for k in subset if k != i])
    return jac
