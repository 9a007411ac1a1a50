from .corpus import Corpus, CorpusSplit, generate_corpus
from .generators import (
    check_disjoint,
    generate_rig,
    make_calibration_templates,
    make_holdout_templates,
    make_training_templates,
    perturb_rig,
    template_matrix,
)
from .synthetic_spec import SyntheticSpec
from .validation import (
    ControlTrial,
    GeometryTrial,
    ValidationSetup,
    calibrate,
    control_error,
    control_validation_trial,
    geometry_error,
    geometry_validation_trial,
    make_validation_setup,
    validation_tuner,
)

__all__ = [
    "ControlTrial",
    "Corpus",
    "CorpusSplit",
    "GeometryTrial",
    "SyntheticSpec",
    "ValidationSetup",
    "calibrate",
    "check_disjoint",
    "control_error",
    "control_validation_trial",
    "generate_corpus",
    "generate_rig",
    "geometry_error",
    "geometry_validation_trial",
    "make_calibration_templates",
    "make_holdout_templates",
    "make_training_templates",
    "make_validation_setup",
    "perturb_rig",
    "template_matrix",
    "validation_tuner",
]
