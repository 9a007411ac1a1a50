from .expression_editor import ActivationEdit, ExpressionSetEditor
from .expression_io import ExpressionIO
from .expression_pair import (
    ACTIVATION_TOL,
    ExpressionPair,
    PairKind,
    augment_controls,
    augment_pair,
    mask_geometry,
)
from .expression_sets import (
    JAW_OPEN,
    JAW_OPEN_EXTREME,
    PERSON19,
    PUPPET15,
    ExpressionTemplate,
    make_expression_set,
    make_seal_constraint,
    template_control_names,
)
from .rig_fitting import (
    CalibrationConfig,
    fit_residuals,
    fit_rig_params,
    unidentified_parameters,
)

__all__ = [
    "ACTIVATION_TOL",
    "JAW_OPEN",
    "JAW_OPEN_EXTREME",
    "PERSON19",
    "PUPPET15",
    "ActivationEdit",
    "CalibrationConfig",
    "ExpressionIO",
    "ExpressionPair",
    "ExpressionSetEditor",
    "ExpressionTemplate",
    "PairKind",
    "augment_controls",
    "augment_pair",
    "fit_residuals",
    "fit_rig_params",
    "make_expression_set",
    "make_seal_constraint",
    "mask_geometry",
    "template_control_names",
    "unidentified_parameters",
]
