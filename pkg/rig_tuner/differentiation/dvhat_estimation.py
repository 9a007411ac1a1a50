from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rig_tuner.rigs.rig import as_vector

from .directions import DirectionStrategy
from .jacobian_estimate import (
    GeometryFunction,
    JacobianEstimate,
    apply_secant,
    check_direction,
    evaluate_finite,
    forward_difference,
)
from .secant_diagnostics import SecantDiagnostics
from .step_selection import StepMode, StepPolicy, select_step


def estimate_dvhat_dtheta(
    u_eval: GeometryFunction,
    anchor: ArrayLike,
    strategy: DirectionStrategy,
    warm: JacobianEstimate | None = None,
    step_policy: StepPolicy | None = None,
    *,
    rng: np.random.Generator | None = None,
    gradient: ArrayLike | None = None,
    u_anchor: NDArray | None = None,
    diagnostics: SecantDiagnostics | None = None,
    label: str = "",
) -> JacobianEstimate:
    """
    Estimate du/dtheta at anchor by secant updates along the strategy's
    directions, starting from the warm estimate (re-anchored) or from zero.
    """
    anchor = as_vector(anchor, "anchor")
    step_policy = step_policy or StepPolicy()
    if u_anchor is None:
        u_anchor = evaluate_finite(u_eval, anchor)

    if warm is not None:
        est = warm.reanchored(anchor)
    else:
        est = JacobianEstimate.zeros(u_anchor.shape[0], anchor)

    frozen_s = est.last_step if step_policy.mode == StepMode.FROZEN else None
    for index, direction in enumerate(strategy.directions(anchor.shape[0], rng, gradient)):
        direction = check_direction(direction, anchor.shape[0])
        l_delta = float("nan")
        if step_policy.mode == StepMode.FIXED:
            s = step_policy.s
            difference = forward_difference(u_eval, anchor, direction, s, u_anchor)
        elif frozen_s is not None:
            s = frozen_s
            difference = forward_difference(u_eval, anchor, direction, s, u_anchor)
        else:
            selection = select_step(
                u_eval, anchor, direction, step_policy.grid, u_anchor, step_policy.tie_rtol
            )
            s = selection.chosen_s
            l_delta = selection.chosen_l_delta
            difference = selection.chosen_difference
            if step_policy.mode == StepMode.FROZEN:
                frozen_s = s

        if diagnostics is not None:
            residual = float(np.linalg.norm(est.matrix @ direction - difference))
            diagnostics.record(label, index, s, l_delta, residual)
        est = apply_secant(est, direction, difference, s)

    return est
