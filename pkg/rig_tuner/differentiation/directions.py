from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rig_tuner.utils.errors import RigContractError
from rig_tuner.utils.file_access import reject_unknown_fields


class DirectionMode(Enum):
    RANDOM = "random"
    STEEPEST_DESCENT = "steepest_descent"
    FIXED = "fixed"


@dataclass
class DirectionStrategy:
    """
    Source of the unit directions used for secant updates.

    random draws count Gaussian directions, steepest_descent uses the
    normalized negative gradient, fixed replays the given directions.
    """

    mode: DirectionMode = DirectionMode.RANDOM
    count: int = 1
    seed: int = 0
    fixed: list[list[float]] = field(default_factory=list)

    def __post_init__(self):
        self.mode = DirectionMode(self.mode)
        if self.count < 0:
            _error_msg = f"Direction count must be nonnegative, got {self.count}"
            raise RigContractError(_error_msg)
        if self.mode == DirectionMode.FIXED and not self.fixed:
            _error_msg = "Fixed direction strategy requires at least one direction"
            raise RigContractError(_error_msg)

    @classmethod
    def random(cls, count: int = 1, seed: int = 0) -> DirectionStrategy:
        return cls(DirectionMode.RANDOM, count, seed)

    @classmethod
    def steepest_descent(cls) -> DirectionStrategy:
        return cls(DirectionMode.STEEPEST_DESCENT, 1)

    @classmethod
    def from_directions(cls, directions: ArrayLike) -> DirectionStrategy:
        directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
        return cls(DirectionMode.FIXED, len(directions), fixed=directions.tolist())

    @property
    def needs_gradient(self) -> bool:
        return self.mode == DirectionMode.STEEPEST_DESCENT

    def make_rng(self, *stream: int) -> np.random.Generator:
        """
        Independent generator per stream key so that parallel estimates stay
        reproducible whatever the scheduling.
        """
        return np.random.default_rng([self.seed, *stream])

    def directions(
        self,
        n_params: int,
        rng: np.random.Generator | None = None,
        gradient: ArrayLike | None = None,
    ) -> list[NDArray]:
        if self.mode == DirectionMode.RANDOM:
            rng = rng if rng is not None else self.make_rng()
            return [_normalized(rng.standard_normal(n_params)) for _ in range(self.count)]

        if self.mode == DirectionMode.STEEPEST_DESCENT:
            if gradient is None:
                _error_msg = "Steepest descent directions require a gradient"
                raise RigContractError(_error_msg)
            gradient = np.asarray(gradient, dtype=np.float64)
            if gradient.shape != (n_params,):
                _error_msg = f"Gradient of shape {gradient.shape} does not match {n_params} params"
                raise RigContractError(_error_msg)
            if not np.any(gradient):
                return []
            return [_normalized(-gradient)]

        directions = []
        for d in self.fixed:
            d = np.asarray(d, dtype=np.float64)
            if d.shape != (n_params,):
                _error_msg = f"Fixed direction of shape {d.shape} does not match {n_params} params"
                raise RigContractError(_error_msg)
            directions.append(_normalized(d))
        return directions

    @classmethod
    def from_dict(cls, content: dict) -> DirectionStrategy:
        reject_unknown_fields(cls, content)
        return cls(**content)

    def to_dict(self) -> dict:
        content = {"mode": self.mode.value, "count": self.count, "seed": self.seed}
        if self.fixed:
            content["fixed"] = self.fixed
        return content


def _normalized(vector: NDArray) -> NDArray:
    norm = np.linalg.norm(vector)
    if norm == 0 or not np.isfinite(norm):
        _error_msg = "Cannot normalize a zero or non-finite direction"
        raise RigContractError(_error_msg)
    return vector / norm
