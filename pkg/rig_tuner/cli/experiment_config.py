from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from rig_tuner.calibration import CalibrationConfig, ExpressionIO, ExpressionPair
from rig_tuner.core import PipelineConfig
from rig_tuner.rigs import Rig, RigIO, RigParams
from rig_tuner.trackers import DirectTracker, SolveMode, SubprocessTracker, Tracker
from rig_tuner.utils.errors import ConfigError, RigTunerError
from rig_tuner.utils.file_access import read_json, reject_unknown_fields

EXPERIMENT_FORMAT_VERSION = 1

_PATH_FIELDS = ("rig", "expressions", "geometry", "theta_init", "out")


@dataclass
class ExperimentConfig:
    """
    Inputs of the calibrate and finetune commands. Relative paths resolve
    against the directory of the config file.

    tracker is "builtin" (direct solve of the rig with solve_mode) or
    "subprocess:<command>" for an external tracker speaking JSON lines.
    """

    format_version: int = EXPERIMENT_FORMAT_VERSION
    rig: Path | None = None
    expressions: Path | None = None
    geometry: Path | None = None
    theta_init: Path | None = None
    out: Path | None = None
    seed: int = 0
    tracker: str = "builtin"
    solve_mode: str = "lm(1e-8)"
    tracker_timeout: float = 30.0
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    augment: bool = True
    activation_overrides: dict[str, dict[str, float]] = field(default_factory=dict)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    @classmethod
    def from_dict(cls, content: dict, base_dir: str | Path = ".") -> ExperimentConfig:
        reject_unknown_fields(cls, content)
        version = content.get("format_version")
        if version != EXPERIMENT_FORMAT_VERSION:
            _error_msg = (
                f"Unsupported experiment format_version {version!r}, "
                f"expected {EXPERIMENT_FORMAT_VERSION}"
            )
            raise ConfigError(_error_msg)

        content = dict(content)
        base_dir = Path(base_dir)
        for name in _PATH_FIELDS:
            if content.get(name) is not None:
                content[name] = base_dir / content[name]
        if "calibration" in content:
            content["calibration"] = CalibrationConfig.from_dict(content["calibration"])
        if "pipeline" in content:
            content["pipeline"] = PipelineConfig.from_dict(content["pipeline"])
        return cls(**content)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        path = Path(path)
        content = read_json(path)
        if not isinstance(content, dict):
            _error_msg = "Experiment config must be a JSON object"
            raise ConfigError(_error_msg, path)
        try:
            return cls.from_dict(content, path.resolve().parent)
        except ConfigError as e:
            raise ConfigError(str(e), path) from e
        except (RigTunerError, TypeError) as e:
            _error_msg = f"Invalid experiment config ({e})"
            raise ConfigError(_error_msg, path) from e

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)

    def require(self, *names: str) -> None:
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            _error_msg = f"Experiment config is missing {', '.join(missing)}"
            raise ConfigError(_error_msg)

    def load_rig(self) -> Rig:
        self.require("rig")
        return RigIO.load_rig(self.rig)

    def load_pairs(self, rig: Rig) -> list[ExpressionPair]:
        self.require("expressions", "geometry")
        templates = ExpressionIO.load_expression_set(self.expressions)
        geometry = ExpressionIO.load_geometry(self.geometry)
        return [
            pair.check(rig)
            for pair in ExpressionIO.build_pairs(templates, geometry, rig.control_names)
        ]

    def load_theta_init(self, rig: Rig) -> RigParams:
        """
        Parameters of the theta_init rig file, the rig's own when unset. The
        file must describe a rig with the same parameter layout.
        """
        if self.theta_init is None:
            return rig.theta.copy()
        source = RigIO.load_rig(self.theta_init)
        if not _same_layout(source, rig):
            _error_msg = "theta_init does not share the sparsity pattern of the rig"
            raise ConfigError(_error_msg, self.theta_init)
        return rig.check_theta(source.theta).copy()

    def make_tracker(self, rig: Rig) -> Tracker:
        if self.tracker == "builtin":
            return DirectTracker(rig, SolveMode.parse(self.solve_mode))
        kind, _, command = self.tracker.partition(":")
        if kind != "subprocess" or not command.strip():
            _error_msg = f"Tracker must be 'builtin' or 'subprocess:CMD', got {self.tracker!r}"
            raise ConfigError(_error_msg)
        return SubprocessTracker(command, rig.n_controls, timeout=self.tracker_timeout)

    def to_dict(self) -> dict:
        def text(path: Path | None) -> str | None:
            return None if path is None else str(path)

        return {
            "format_version": self.format_version,
            **{name: text(getattr(self, name)) for name in _PATH_FIELDS},
            "seed": self.seed,
            "tracker": self.tracker,
            "solve_mode": self.solve_mode,
            "tracker_timeout": self.tracker_timeout,
            "calibration": self.calibration.to_dict(),
            "augment": self.augment,
            "activation_overrides": {
                name: dict(values) for name, values in self.activation_overrides.items()
            },
            "pipeline": self.pipeline.to_dict(),
        }


def _same_layout(source: Rig, rig: Rig) -> bool:
    if type(source) is not type(rig) or source.n_factors != rig.n_factors:
        return False
    return (
        np.array_equal(source.param_rows, rig.param_rows)
        and np.array_equal(source.param_factors, rig.param_factors)
        and all(
            source.factor_controls(f) == rig.factor_controls(f) for f in range(rig.n_factors)
        )
    )
