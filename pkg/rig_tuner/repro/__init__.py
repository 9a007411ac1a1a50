from .constants import completed_fit, first_columns, pairs_from_columns, perturbation_columns
from .linear_fits import LinearExample
from .perturbed_trackers import PerturbedSetting, perturbed_setting, step_landscape
from .repro_result import CellFailure, CsvTable, ReproResult, ReproSettings
from .singularity import control_trajectory
from .targets import REPRO_TARGETS, run_target
from .thresholds import THRESHOLDS, THRESHOLDS_VERSION, Comparison, Threshold

__all__ = [
    "REPRO_TARGETS",
    "THRESHOLDS",
    "THRESHOLDS_VERSION",
    "CellFailure",
    "Comparison",
    "CsvTable",
    "LinearExample",
    "PerturbedSetting",
    "ReproResult",
    "ReproSettings",
    "Threshold",
    "completed_fit",
    "control_trajectory",
    "first_columns",
    "pairs_from_columns",
    "perturbation_columns",
    "perturbed_setting",
    "run_target",
    "step_landscape",
]
