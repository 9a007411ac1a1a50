from .decimation import DecimatedProblem, decimate_problem
from .direct_tracker import DirectTracker, track_direct
from .filter_mask import FilterMask
from .filtered_tracker import FilteredTracker, filter_tracker
from .perturbed_tracker import (
    ControlPerturbation,
    PerturbationMode,
    PerturbedTracker,
    track_perturbed,
)
from .solve_mode import DEFAULT_SOLVE_MODE, SolveKind, SolveMode
from .subprocess_tracker import SubprocessTracker
from .tracker import (
    CountingTracker,
    GeometryCorrection,
    Tracker,
    TrackerCapabilities,
    tracker_rig_eval,
)

__all__ = [
    "DEFAULT_SOLVE_MODE",
    "ControlPerturbation",
    "CountingTracker",
    "DecimatedProblem",
    "DirectTracker",
    "FilterMask",
    "FilteredTracker",
    "GeometryCorrection",
    "PerturbationMode",
    "PerturbedTracker",
    "SolveKind",
    "SolveMode",
    "SubprocessTracker",
    "Tracker",
    "TrackerCapabilities",
    "decimate_problem",
    "filter_tracker",
    "track_direct",
    "track_perturbed",
    "tracker_rig_eval",
]
