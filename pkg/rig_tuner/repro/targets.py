from __future__ import annotations

import logging
from collections.abc import Callable

from rig_tuner.utils.errors import ConfigError

from .linear_fits import table1, table2, table3, table4
from .perturbed_trackers import fig7, table5, table6, table7, table8
from .repro_result import ReproResult, ReproSettings
from .singularity import fig1, fig2, fig3
from .thresholds import THRESHOLDS

REPRO_TARGETS: dict[str, Callable[[ReproSettings], ReproResult]] = {
    "table1": table1,
    "table2": table2,
    "table3": table3,
    "table4": table4,
    "table5": table5,
    "table6": table6,
    "table7": table7,
    "table8": table8,
    "fig1": fig1,
    "fig2": fig2,
    "fig3": fig3,
    "fig7": fig7,
}


def run_target(target: str, settings: ReproSettings | None = None) -> ReproResult:
    """Runs one embedded experiment and checks it against its thresholds."""
    if target not in REPRO_TARGETS:
        _error_msg = f"Unknown repro target {target!r}, expected one of {sorted(REPRO_TARGETS)}"
        raise ConfigError(_error_msg)

    result = REPRO_TARGETS[target](settings or ReproSettings())
    result.check(THRESHOLDS.get(target, []))
    if result.passed:
        logging.info("Repro %s passed %d thresholds", target, len(result.thresholds))
    else:
        for failure in result.failures:
            logging.warning("Repro %s", failure.describe())
    return result
