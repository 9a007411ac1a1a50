"""
Exception hierarchy shared by every rig-tuner package.
"""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import numpy as np


class RigTunerError(Exception):
    pass


class RigContractError(RigTunerError, ValueError):
    """
    Dimension or contract violation on rigs, controls, geometry or parameters.
    """


class UnderdeterminedSystemError(RigTunerError):
    """
    Raised when an unregularized least-squares fit leaves parameters unidentified.
    """

    def __init__(self, message: str, null_parameters: Sequence[int]):
        super().__init__(message)
        self.null_parameters = list(null_parameters)


class SingularMatrixError(RigTunerError):
    pass


class TrackerError(RigTunerError):
    """
    Tracker evaluation failure. The transcript holds the last exchanges with the
    tracker when it runs out of process.
    """

    def __init__(self, message: str, transcript: Sequence[str] = ()):
        super().__init__(message)
        self.transcript = list(transcript)

    def __str__(self):
        msg = super().__str__()
        if not self.transcript:
            return msg
        return msg + "\n--- transcript ---\n" + "\n".join(self.transcript)


class NonFiniteError(RigTunerError, FloatingPointError):
    def __init__(self, message: str, theta: np.ndarray | None = None):
        super().__init__(message)
        self.theta = None if theta is None else np.array(theta, copy=True)


class NonFiniteLossError(RigTunerError, FloatingPointError):
    def __init__(self, message: str, iteration: int, theta: np.ndarray):
        super().__init__(message)
        self.iteration = iteration
        self.theta = np.array(theta, copy=True)


class MergeConflictError(RigTunerError):
    def __init__(self, message: str, parameters: Sequence[int]):
        super().__init__(message)
        self.parameters = sorted(int(p) for p in parameters)


class PipelineConfigError(RigTunerError, ValueError):
    pass


class ConfigError(RigTunerError, ValueError):
    def __init__(self, message: str, path: str | Path | None = None):
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path
