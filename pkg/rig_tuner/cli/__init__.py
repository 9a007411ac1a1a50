from .cli import cmd_calibrate, cmd_finetune, cmd_repro, main, parse_args
from .experiment_config import EXPERIMENT_FORMAT_VERSION, ExperimentConfig

__all__ = [
    "EXPERIMENT_FORMAT_VERSION",
    "ExperimentConfig",
    "cmd_calibrate",
    "cmd_finetune",
    "cmd_repro",
    "main",
    "parse_args",
]
