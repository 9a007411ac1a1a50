from __future__ import annotations

from numpy.typing import ArrayLike

from rig_tuner.rigs import ControlVector

from .filter_mask import FilterMask
from .tracker import Tracker, TrackerCapabilities


class FilteredTracker(Tracker):
    """
    T_H = H T. The inner tracker still solves the full problem; its output is
    zeroed outside the mask.
    """

    def __init__(self, inner: Tracker, mask: FilterMask):
        self._inner = inner
        self._mask = mask.check(inner.n_controls)

    @property
    def inner(self) -> Tracker:
        return self._inner

    @property
    def mask(self) -> FilterMask:
        return self._mask

    @property
    def n_controls(self) -> int:
        return self._inner.n_controls

    @property
    def capabilities(self) -> TrackerCapabilities:
        return self._inner.capabilities

    def track(self, v: ArrayLike, theta_T: ArrayLike) -> ControlVector:
        return self._mask.apply(self._inner.track(v, theta_T))


def filter_tracker(tracker: Tracker, mask: FilterMask) -> FilteredTracker:
    if isinstance(tracker, FilteredTracker):
        return FilteredTracker(tracker.inner, tracker.mask & mask)
    return FilteredTracker(tracker, mask)
