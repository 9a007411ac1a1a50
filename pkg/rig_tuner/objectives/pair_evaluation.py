from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rig_tuner.calibration import ExpressionPair
from rig_tuner.rigs import ControlVector, GeometryVector, IndexSet, Rig
from rig_tuner.trackers import DecimatedProblem, FilterMask, Tracker, decimate_problem
from rig_tuner.utils.errors import RigContractError

from .objective_config import GeometryTarget, ObjectiveConfig, TrackerVariant


@dataclass(frozen=True, eq=False)
class PairSetup:
    """
    Per-pair data that does not depend on theta_T: masks, the decimated
    problem and tracker, and the target geometry v+.
    """

    index: int
    pair: ExpressionPair
    variant_mask: FilterMask
    decimated: DecimatedProblem | None
    decimated_tracker: Tracker | None
    spurious_masks: tuple[FilterMask, ...]
    target_geometry: GeometryVector
    rows: IndexSet

    @property
    def name(self) -> str:
        return self.pair.name

    def mask_for(self, variant: TrackerVariant) -> FilterMask | None:
        return None if variant == TrackerVariant.FULL else self.variant_mask

    def track(
        self,
        variant: TrackerVariant,
        tracker: Tracker,
        theta_T: NDArray,
        full: NDArray | None = None,
    ) -> ControlVector:
        """
        Full-length controls of the given tracker variant. A precomputed full
        tracker output is reused for the filtered variant.
        """
        if variant == TrackerVariant.DECIMATED:
            if self.decimated is None:
                return np.zeros(self.pair.c.shape[0])
            c_decimated = self.decimated_tracker.track(
                self.pair.v, self.decimated.sub_theta(theta_T)
            )
            return self.decimated.embed_controls(c_decimated)

        if full is None:
            full = np.asarray(tracker.track(self.pair.v, theta_T), dtype=np.float64)
        if variant == TrackerVariant.FILTERED:
            return self.variant_mask.apply(full)
        return full


def prepare_pairs(
    config: ObjectiveConfig,
    pairs: Sequence[ExpressionPair],
    tracker: Tracker,
    rig: Rig,
) -> list[PairSetup]:
    if not pairs:
        _error_msg = "The objective needs at least one expression pair"
        raise RigContractError(_error_msg)
    config.check(rig)
    theta_R = config.reference_theta(rig)
    decimate = config.uses_decimation()

    setups = []
    for index, pair in enumerate(pairs):
        pair.check(rig)
        variant_mask = config.variant_mask(pair, rig.n_controls)

        problem, decimated_tracker = None, None
        if decimate and not variant_mask.is_empty:
            problem = decimate_problem(rig, variant_mask)
            decimated_tracker = tracker.decimate(problem)
        elif decimate:
            logging.debug("Pair '%s' has no control to decimate on", pair.name)

        if config.geometry_target == GeometryTarget.PAIR:
            target = pair.v
        else:
            target = rig.evaluate(pair.c, theta_R)

        setups.append(
            PairSetup(
                index=index,
                pair=pair,
                variant_mask=variant_mask,
                decimated=problem,
                decimated_tracker=decimated_tracker,
                spurious_masks=tuple(
                    term.mask(pair, rig.n_controls) for term in config.spurious_terms
                ),
                target_geometry=target,
                rows=pair.geometry_rows(),
            )
        )
    return setups


@dataclass(frozen=True, eq=False)
class PairEvaluation:
    setup: PairSetup
    controls: dict[TrackerVariant, ControlVector]
    gamma1_residual: NDArray
    gamma2_residual: NDArray
    gamma3_residual: NDArray
    spurious_residuals: tuple[NDArray, ...]

    @property
    def name(self) -> str:
        return self.setup.name

    @property
    def weight(self) -> float:
        return self.setup.pair.weight

    def terms(self) -> dict[str, float]:
        return {
            "gamma1": float(self.gamma1_residual @ self.gamma1_residual),
            "gamma2": float(self.gamma2_residual @ self.gamma2_residual),
            "gamma3": float(self.gamma3_residual @ self.gamma3_residual),
        }

    def spurious_terms(self) -> list[float]:
        return [float(r @ r) for r in self.spurious_residuals]

    def value(self, config: ObjectiveConfig) -> float:
        terms = self.terms()
        total = (
            config.gamma1 * terms["gamma1"]
            + config.gamma2 * terms["gamma2"]
            + config.gamma3 * terms["gamma3"]
        )
        total += sum(
            term.weight * value
            for term, value in zip(config.spurious_terms, self.spurious_terms(), strict=True)
        )
        return self.weight * total


def evaluate_pair(
    setup: PairSetup,
    config: ObjectiveConfig,
    tracker: Tracker,
    rig: Rig,
    theta_T: ArrayLike,
) -> PairEvaluation:
    theta_T = rig.check_theta(theta_T)
    theta_R = config.reference_theta(rig)
    c_plus = setup.pair.c

    controls: dict[TrackerVariant, ControlVector] = {}
    variants = config.evaluated_variants()
    if variants & {TrackerVariant.FULL, TrackerVariant.FILTERED}:
        controls[TrackerVariant.FULL] = setup.track(TrackerVariant.FULL, tracker, theta_T)
    if TrackerVariant.FILTERED in variants:
        controls[TrackerVariant.FILTERED] = setup.track(
            TrackerVariant.FILTERED, tracker, theta_T, controls[TrackerVariant.FULL]
        )
    if TrackerVariant.DECIMATED in variants:
        controls[TrackerVariant.DECIMATED] = setup.track(
            TrackerVariant.DECIMATED, tracker, theta_T
        )

    c1 = controls[config.gamma1_variant]
    mask1 = setup.mask_for(config.gamma1_variant)
    gamma1_residual = c1 - c_plus if mask1 is None else mask1.apply(c1 - c_plus)

    rows = setup.rows
    target = setup.target_geometry[rows]
    c2 = controls[config.gamma2_variant]
    gamma2_residual = rig.evaluate(c2, theta_R)[rows] - target
    c3 = controls[config.gamma3_variant]
    gamma3_residual = rig.evaluate(c3, theta_T)[rows] - target

    spurious = []
    for term, mask in zip(config.spurious_terms, setup.spurious_masks, strict=True):
        c_full = controls[TrackerVariant.FULL]
        spurious.append(mask.apply(c_full if term.target_zero else c_full - c_plus))

    return PairEvaluation(
        setup=setup,
        controls=controls,
        gamma1_residual=gamma1_residual,
        gamma2_residual=gamma2_residual,
        gamma3_residual=gamma3_residual,
        spurious_residuals=tuple(spurious),
    )
