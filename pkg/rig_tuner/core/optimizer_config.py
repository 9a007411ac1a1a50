from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from rig_tuner.differentiation import DirectionStrategy, StepPolicy
from rig_tuner.objectives import AnalyticDvhat
from rig_tuner.utils.errors import ConfigError, RigContractError
from rig_tuner.utils.file_access import reject_unknown_fields


class LineSearch(Enum):
    """
    halving backtracks from step_size until the loss decreases, adaptive
    backtracks the same way from twice the last accepted step.
    """

    NONE = "none"
    HALVING = "halving"
    ADAPTIVE = "adaptive"


@dataclass
class OptimizerConfig:
    """
    Gradient descent settings. Stops on max_iters, gradient norm below
    grad_tol, total loss at or below target_loss, or a loss decrease below
    loss_tol (disabled at 0). seed selects the random direction streams of
    secant estimates.
    """

    step_size: float = 1e-2
    max_iters: int = 1000
    grad_tol: float = 1e-10
    loss_tol: float = 0.0
    target_loss: float | None = None
    line_search: LineSearch = LineSearch.NONE
    max_halvings: int = 30
    sample_every: int = 10
    seed: int = 0

    def __post_init__(self):
        self.line_search = LineSearch(self.line_search)
        if self.max_iters < 1:
            _error_msg = f"max_iters must be at least 1, got {self.max_iters}"
            raise RigContractError(_error_msg)
        if not self.step_size > 0:
            _error_msg = f"step_size must be positive, got {self.step_size}"
            raise RigContractError(_error_msg)
        if self.grad_tol < 0 or self.loss_tol < 0:
            _error_msg = "Tolerances must be nonnegative"
            raise RigContractError(_error_msg)
        if self.sample_every < 1:
            _error_msg = f"sample_every must be at least 1, got {self.sample_every}"
            raise RigContractError(_error_msg)

    @classmethod
    def from_dict(cls, content: dict) -> OptimizerConfig:
        reject_unknown_fields(cls, content)
        return cls(**content)

    def to_dict(self) -> dict:
        return {
            "step_size": self.step_size,
            "max_iters": self.max_iters,
            "grad_tol": self.grad_tol,
            "loss_tol": self.loss_tol,
            "target_loss": self.target_loss,
            "line_search": self.line_search.value,
            "max_halvings": self.max_halvings,
            "sample_every": self.sample_every,
            "seed": self.seed,
        }


class DvhatSource(Enum):
    """
    Where dv_hat/dtheta comes from: dropped, a closed form supplied by the
    caller, or secant estimates of the black-box tracker.
    """

    NONE = "none"
    ANALYTIC = "analytic"
    SECANT = "secant"


@dataclass
class DiffConfig:
    dvhat_source: DvhatSource = DvhatSource.NONE
    directions: DirectionStrategy = field(default_factory=DirectionStrategy)
    step_policy: StepPolicy = field(default_factory=StepPolicy)
    reg_eps: float = 0.0
    warm_start: bool = True
    analytic: AnalyticDvhat | None = None

    def __post_init__(self):
        self.dvhat_source = DvhatSource(self.dvhat_source)
        if isinstance(self.directions, dict):
            self.directions = DirectionStrategy.from_dict(self.directions)
        if isinstance(self.step_policy, dict):
            self.step_policy = StepPolicy.from_dict(self.step_policy)
        if self.reg_eps < 0:
            _error_msg = f"reg_eps must be nonnegative, got {self.reg_eps}"
            raise RigContractError(_error_msg)
        if self.dvhat_source == DvhatSource.ANALYTIC and self.analytic is None:
            _error_msg = "Analytic dv_hat/dtheta requires a closed-form provider"
            raise RigContractError(_error_msg)

    @classmethod
    def from_dict(cls, content: dict) -> DiffConfig:
        reject_unknown_fields(cls, content)
        if "analytic" in content:
            _error_msg = "Closed-form dv_hat/dtheta providers cannot be read from a file"
            raise ConfigError(_error_msg)
        return cls(**content)

    def to_dict(self) -> dict:
        return {
            "dvhat_source": self.dvhat_source.value,
            "directions": self.directions.to_dict(),
            "step_policy": self.step_policy.to_dict(),
            "reg_eps": self.reg_eps,
            "warm_start": self.warm_start,
        }
