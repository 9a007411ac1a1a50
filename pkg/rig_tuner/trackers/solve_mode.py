from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from rig_tuner.utils.errors import RigContractError


class SolveKind(Enum):
    INVERSE = "inverse"
    LEAST_SQUARES = "least_squares"
    MIN_NORM = "min_norm"
    LM = "lm"


@dataclass(frozen=True)
class SolveMode:
    kind: SolveKind = SolveKind.LM
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.epsilon < 0:
            _error_msg = f"Solve mode epsilon must be nonnegative, got {self.epsilon}"
            raise RigContractError(_error_msg)

    @classmethod
    def inverse(cls) -> SolveMode:
        return cls(SolveKind.INVERSE, 0.0)

    @classmethod
    def least_squares(cls) -> SolveMode:
        return cls(SolveKind.LEAST_SQUARES, 0.0)

    @classmethod
    def min_norm(cls) -> SolveMode:
        return cls(SolveKind.MIN_NORM, 0.0)

    @classmethod
    def lm(cls, epsilon: float = 1e-8) -> SolveMode:
        return cls(SolveKind.LM, float(epsilon))

    @classmethod
    def parse(cls, text: str) -> SolveMode:
        """Parse "inverse", "least_squares", "min_norm", "lm" or "lm(1e-4)"."""
        match = re.fullmatch(r"\s*lm\s*\(\s*([^)]+)\)\s*", text)
        if match:
            return cls.lm(float(match.group(1)))
        try:
            kind = SolveKind(text.strip())
        except ValueError:
            _error_msg = f"Unknown solve mode '{text}'"
            raise RigContractError(_error_msg) from None
        return cls.lm() if kind == SolveKind.LM else cls(kind, 0.0)

    def __str__(self):
        if self.kind == SolveKind.LM:
            return f"lm({self.epsilon:g})"
        return self.kind.value


DEFAULT_SOLVE_MODE = SolveMode.lm(1e-8)
