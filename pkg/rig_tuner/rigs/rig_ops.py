"""
Functional entry points over rigs.
"""

import scipy.sparse as sp
from numpy.typing import ArrayLike, NDArray

from .psd import PsdSpec
from .psd import psd_expand as _psd_expand
from .rig import Rig
from .types import GeometryVector


def eval_rig(rig: Rig, c: ArrayLike, theta: ArrayLike | None = None) -> GeometryVector:
    return rig.evaluate(c, theta)


def psd_expand(spec: PsdSpec, c: ArrayLike) -> NDArray:
    return _psd_expand(spec, c)


def rig_jacobian_controls(
    rig: Rig, c: ArrayLike, theta: ArrayLike | None = None
) -> NDArray:
    return rig.jacobian_controls(c, theta)


def rig_jacobian_params(rig: Rig, c: ArrayLike) -> sp.csc_matrix:
    return rig.jacobian_params(c)
