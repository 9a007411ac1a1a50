from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass
from typing import TYPE_CHECKING

from numpy.typing import ArrayLike

from rig_tuner.rigs import ControlVector, GeometryVector, Rig
from rig_tuner.utils.errors import TrackerError

if TYPE_CHECKING:
    from .decimation import DecimatedProblem

GeometryCorrection = Callable[[GeometryVector, ArrayLike], GeometryVector]


@dataclass(frozen=True)
class TrackerCapabilities:
    supports_decimation: bool = False
    exposes_internals: bool = False


class Tracker(ABC):
    """
    Black-box inverse rig solver: geometry in, controls out.

    Implementations must be deterministic for identical (v, theta_T). Their
    internal configuration is never modified by the fine-tuning code, which
    only calls track().
    """

    @property
    @abstractmethod
    def n_controls(self) -> int:
        pass

    @property
    def capabilities(self) -> TrackerCapabilities:
        return TrackerCapabilities()

    @abstractmethod
    def track(self, v: ArrayLike, theta_T: ArrayLike) -> ControlVector:
        pass

    def decimate(self, problem: DecimatedProblem) -> Tracker:
        """
        Tracker solving the decimated problem, for trackers that can be
        restricted to a control subset at the problem level.
        """
        _error_msg = f"{type(self).__name__} does not support decimation"
        raise TrackerError(_error_msg)

    def __call__(self, v: ArrayLike, theta_T: ArrayLike) -> ControlVector:
        return self.track(v, theta_T)


class CountingTracker(Tracker):
    """
    Forwards to an inner tracker and counts track() calls.
    """

    def __init__(self, inner: Tracker):
        self._inner = inner
        self._count = 0
        self._lock = threading.Lock()

    @property
    def inner(self) -> Tracker:
        return self._inner

    @property
    def n_controls(self) -> int:
        return self._inner.n_controls

    @property
    def capabilities(self) -> TrackerCapabilities:
        return self._inner.capabilities

    @property
    def evaluation_count(self) -> int:
        return self._count

    def track(self, v: ArrayLike, theta_T: ArrayLike) -> ControlVector:
        with self._lock:
            self._count += 1
        return self._inner.track(v, theta_T)

    def decimate(self, problem: DecimatedProblem) -> Tracker:
        return CountingTracker(self._inner.decimate(problem))


def tracker_rig_eval(
    tracker: Tracker,
    rig: Rig,
    v: ArrayLike,
    theta_T: ArrayLike,
    correction: GeometryCorrection | None = None,
) -> GeometryVector:
    """
    v_hat = R(T(v; theta_T); theta_T), minus the geometry correction
    v_tilde_T(v; theta_T) when one is supplied.
    """
    v = rig.check_geometry(v)
    c = tracker.track(v, theta_T)
    v_hat = rig.evaluate(c, theta_T)
    if correction is not None:
        v_hat = v_hat - rig.check_geometry(correction(v, theta_T))
    return v_hat
