from .joint_psd_rig import JointPsdRig
from .linear_rig import LinearRig
from .psd import PsdSpec, make_psd_spec, psd_jacobian
from .rig import Rig
from .rig_io import RigIO
from .rig_ops import eval_rig, psd_expand, rig_jacobian_controls, rig_jacobian_params
from .types import ControlVector, GeometryVector, IndexSet, RigParams

__all__ = [
    "ControlVector",
    "GeometryVector",
    "IndexSet",
    "JointPsdRig",
    "LinearRig",
    "PsdSpec",
    "Rig",
    "RigIO",
    "RigParams",
    "eval_rig",
    "make_psd_spec",
    "psd_expand",
    "psd_jacobian",
    "rig_jacobian_controls",
    "rig_jacobian_params",
]
