from __future__ import annotations

import threading
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.typing import NDArray

from rig_tuner.differentiation import (
    JacobianEstimate,
    SecantDiagnostics,
    estimate_dvhat_dtheta,
    solve_dT_dtheta,
)
from rig_tuner.objectives import ObjectiveConfig, PairEvaluation, TrackerVariant
from rig_tuner.rigs import Rig
from rig_tuner.trackers import GeometryCorrection, Tracker

from .optimizer_config import DiffConfig, DvhatSource

_VARIANT_ORDER = [TrackerVariant.FULL, TrackerVariant.FILTERED, TrackerVariant.DECIMATED]

EstimateKey = tuple[int, TrackerVariant]


class TrackerDifferentiator:
    """
    dT/dtheta for every pair and tracker variant of an objective, through the
    implicit rig equation. dv_hat/dtheta is dropped, taken from a closed form
    or estimated by secant updates warm-started across calls.
    """

    def __init__(
        self,
        config: DiffConfig,
        objective: ObjectiveConfig,
        tracker: Tracker,
        rig: Rig,
        *,
        jobs: int = 1,
        seed: int = 0,
        diagnostics: SecantDiagnostics | None = None,
        correction: GeometryCorrection | None = None,
    ):
        self._config = config
        self._seed = seed
        self._objective = objective
        self._tracker = tracker
        self._rig = rig
        self._jobs = jobs
        self._diagnostics = diagnostics
        self._correction = correction
        self._active = objective.active_indices(rig)
        self._warm: dict[EstimateKey, JacobianEstimate] = {}
        self._rngs: dict[EstimateKey, np.random.Generator] = {}
        self._latest: dict[EstimateKey, NDArray] = {}
        self._lock = threading.Lock()

    @property
    def active_theta(self) -> NDArray:
        return self._active

    def latest_dvhat(self, pair_index: int, variant: TrackerVariant) -> NDArray | None:
        """dv_hat/dtheta used by the last call, over the active parameters."""
        return self._latest.get((pair_index, variant))

    def jacobians(
        self,
        evaluations: Sequence[PairEvaluation],
        theta_T: NDArray,
        *,
        gradient: NDArray | None = None,
        update: bool = True,
    ) -> list[dict[TrackerVariant, NDArray]]:
        """
        update=False reuses the current estimates without secant updates, as
        needed to compute a pre-update steepest descent direction.
        """
        variants = [v for v in _VARIANT_ORDER if v in self._objective.required_variants()]

        def pair_jacobians(evaluation: PairEvaluation) -> dict[TrackerVariant, NDArray]:
            return {
                variant: self._solve(evaluation, variant, theta_T, gradient, update)
                for variant in variants
            }

        if self._jobs <= 1 or len(evaluations) == 1:
            return [pair_jacobians(evaluation) for evaluation in evaluations]
        with ThreadPoolExecutor(max_workers=self._jobs) as pool:
            return list(pool.map(pair_jacobians, evaluations))

    def _solve(
        self,
        evaluation: PairEvaluation,
        variant: TrackerVariant,
        theta_T: NDArray,
        gradient: NDArray | None,
        update: bool,
    ) -> NDArray:
        setup = evaluation.setup
        c = evaluation.controls[variant]
        dvhat = self._dvhat(evaluation, variant, theta_T, gradient, update)
        mask = setup.mask_for(variant)
        return solve_dT_dtheta(
            self._rig,
            c,
            dvhat,
            theta_T,
            reg_eps=self._config.reg_eps,
            active_theta=self._active,
            control_mask=None if mask is None else mask.active,
        )

    def _dvhat(
        self,
        evaluation: PairEvaluation,
        variant: TrackerVariant,
        theta_T: NDArray,
        gradient: NDArray | None,
        update: bool,
    ) -> NDArray | None:
        source = self._config.dvhat_source
        if source == DvhatSource.NONE:
            return None

        key = (evaluation.setup.index, variant)
        if source == DvhatSource.ANALYTIC:
            dvhat = self._config.analytic(evaluation.setup.pair.v, theta_T)[:, self._active]
            self._latest[key] = dvhat
            return dvhat

        with self._lock:
            warm = self._warm.get(key) if self._config.warm_start else None
            rng = self._rngs.setdefault(
                key,
                self._config.directions.make_rng(
                    self._seed, evaluation.setup.index, _VARIANT_ORDER.index(variant)
                ),
            )

        if not update:
            if warm is None:
                return np.zeros((self._rig.m_geometry, self._active.shape[0]))
            return warm.matrix

        u_eval = self._geometry_function(evaluation, variant, theta_T)
        u_anchor = self._tracked_geometry(
            evaluation.setup.pair.v, evaluation.controls[variant], theta_T
        )
        estimate = estimate_dvhat_dtheta(
            u_eval,
            theta_T[self._active],
            self._config.directions,
            warm,
            self._config.step_policy,
            rng=rng,
            gradient=gradient,
            u_anchor=u_anchor,
            diagnostics=self._diagnostics,
            label=f"{evaluation.name}/{variant.value}",
        )
        with self._lock:
            self._warm[key] = estimate
            self._latest[key] = estimate.matrix
        return estimate.matrix

    def _tracked_geometry(self, v: NDArray, c: NDArray, theta: NDArray) -> NDArray:
        v_hat = self._rig.evaluate(c, theta)
        if self._correction is not None:
            v_hat = v_hat - self._rig.check_geometry(self._correction(v, theta))
        return v_hat

    def _geometry_function(
        self, evaluation: PairEvaluation, variant: TrackerVariant, theta_T: NDArray
    ):
        setup = evaluation.setup
        base = np.array(theta_T, dtype=np.float64)

        def u_eval(theta_active: NDArray) -> NDArray:
            theta = base.copy()
            theta[self._active] = theta_active
            c = setup.track(variant, self._tracker, theta)
            return self._tracked_geometry(setup.pair.v, c, theta)

        return u_eval
