from .directions import DirectionMode, DirectionStrategy
from .dvhat_estimation import estimate_dvhat_dtheta
from .implicit_solve import solve_dT_dtheta
from .jacobian_estimate import (
    GeometryFunction,
    JacobianEstimate,
    apply_secant,
    forward_difference,
    secant_update,
)
from .secant_diagnostics import SecantDiagnostics, SecantRecord
from .step_selection import (
    DEFAULT_S_GRID,
    StepMode,
    StepPolicy,
    StepSelection,
    l_delta_profile,
    select_step,
)

__all__ = [
    "DEFAULT_S_GRID",
    "DirectionMode",
    "DirectionStrategy",
    "GeometryFunction",
    "JacobianEstimate",
    "SecantDiagnostics",
    "SecantRecord",
    "StepMode",
    "StepPolicy",
    "StepSelection",
    "apply_secant",
    "estimate_dvhat_dtheta",
    "forward_difference",
    "l_delta_profile",
    "secant_update",
    "select_step",
    "solve_dT_dtheta",
]
