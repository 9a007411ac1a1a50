"""
Synthetic validation protocols on seeded ground-truth rigs.

geometry trial: a rig calibrated from the morphed parameters against
ground-truth training data must reproduce unseen expressions better than the
morphed rig. The training set leaves some corrective PSDs out, so their
parameters keep their morphed values and the unseen error stays positive.

control trial: a damped tracker's controls on unseen expressions must improve
from morphed to calibrated to fine-tuned parameters, and fine-tuning must
help even the ground-truth parameters.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from rig_tuner.calibration import CalibrationConfig, ExpressionPair, fit_rig_params
from rig_tuner.core import FineTuner, LineSearch, OptimizerConfig
from rig_tuner.objectives import ObjectiveConfig
from rig_tuner.rigs import Rig, RigParams
from rig_tuner.trackers import DirectTracker, SolveMode, Tracker

from .corpus import CorpusSplit, generate_corpus
from .generators import (
    generate_rig,
    make_holdout_templates,
    make_training_templates,
    perturb_rig,
)
from .synthetic_spec import SyntheticSpec

VALIDATION_TRACKER_DAMPING = 0.05


def geometry_error(rig: Rig, theta: ArrayLike, pairs: Sequence[ExpressionPair]) -> float:
    """Mean squared geometry residual per pair."""
    return float(np.mean([np.sum((rig.evaluate(p.c, theta) - p.v) ** 2) for p in pairs]))


def control_error(tracker: Tracker, theta: ArrayLike, pairs: Sequence[ExpressionPair]) -> float:
    """Mean squared control error of the tracker per pair."""
    return float(np.mean([np.sum((tracker.track(p.v, theta) - p.c) ** 2) for p in pairs]))


@dataclass
class ValidationSetup:
    rig: Rig
    theta_M: RigParams
    train: list[ExpressionPair]
    holdout: list[ExpressionPair]

    def untrained_params(self) -> list[int]:
        """Parameters whose factor is zero on every training pair."""
        factors = np.array([self.rig.factors(pair.c) for pair in self.train])
        unused = np.flatnonzero(np.all(factors == 0, axis=0))
        return np.flatnonzero(np.isin(self.rig.param_factors, unused)).tolist()


def make_validation_setup(
    spec: SyntheticSpec, holdout_count: int = 8, corrective_fraction: float = 0.5
) -> ValidationSetup:
    rig = generate_rig(spec)
    theta_M = perturb_rig(rig, spec.perturb_magnitude, spec.seed + 1)
    train_templates = make_training_templates(rig, corrective_fraction, spec.seed + 3)
    holdout_templates = make_holdout_templates(
        rig, train_templates, count=holdout_count, seed=spec.seed + 2
    )
    train = generate_corpus(rig, rig.theta, train_templates, CorpusSplit.TRAIN, spec.seed)
    holdout = generate_corpus(
        rig,
        rig.theta,
        holdout_templates,
        CorpusSplit.HOLDOUT,
        spec.seed,
        exclude=train_templates,
    )
    return ValidationSetup(rig, theta_M, train.pairs, holdout.pairs)


def calibrate(setup: ValidationSetup, epsilon_reg: float = 1e-3) -> RigParams:
    """theta_S: regularized fit from theta_M on the training corpus."""
    config = CalibrationConfig(epsilon_reg=epsilon_reg, theta_prior=setup.theta_M)
    return fit_rig_params(setup.rig, setup.train, config)


@dataclass
class GeometryTrial:
    seed: int
    error_M: float
    error_S: float
    untrained_params: int = 0

    @property
    def improvement(self) -> float:
        if self.error_M == 0:
            return 0.0
        return 1.0 - self.error_S / self.error_M


def geometry_validation_trial(spec: SyntheticSpec) -> GeometryTrial:
    setup = make_validation_setup(spec)
    theta_S = calibrate(setup)
    trial = GeometryTrial(
        seed=spec.seed,
        error_M=geometry_error(setup.rig, setup.theta_M, setup.holdout),
        error_S=geometry_error(setup.rig, theta_S, setup.holdout),
        untrained_params=len(setup.untrained_params()),
    )
    logging.info(
        "Geometry trial %d: holdout error %g (morphed) -> %g (calibrated), %d untrained parameters",
        trial.seed,
        trial.error_M,
        trial.error_S,
        trial.untrained_params,
    )
    return trial


@dataclass
class ControlTrial:
    seed: int
    error_M: float
    error_S: float
    error_S_tuned: float
    error_GT: float
    error_GT_tuned: float

    def ordering_holds(self) -> bool:
        return (
            self.error_S_tuned <= self.error_S <= self.error_M
            and self.error_GT_tuned <= self.error_GT
        )


def validation_tuner(max_iters: int = 200) -> FineTuner:
    return FineTuner(
        OptimizerConfig(
            step_size=1.0,
            max_iters=max_iters,
            grad_tol=1e-12,
            line_search=LineSearch.HALVING,
            max_halvings=40,
            sample_every=max_iters,
        )
    )


def _fine_tuned(
    setup: ValidationSetup, tracker: Tracker, theta: RigParams, tuner: FineTuner
) -> RigParams:
    objective = ObjectiveConfig(gamma1=1.0, gamma2=0.0, gamma_eps=1e-4, theta_R=theta)
    report = tuner.fine_tune(objective, setup.train, theta, tracker, setup.rig)
    return report.chosen_theta


def control_validation_trial(spec: SyntheticSpec, tuner: FineTuner | None = None) -> ControlTrial:
    """
    The tracker inverts the rig with damping, so even the ground-truth
    parameters leave a control error that fine-tuning can reduce.
    """
    setup = make_validation_setup(spec)
    tuner = tuner or validation_tuner()
    tracker = DirectTracker(setup.rig, SolveMode.lm(VALIDATION_TRACKER_DAMPING))
    theta_S = calibrate(setup)
    theta_GT = setup.rig.theta

    def holdout_error(theta):
        return control_error(tracker, theta, setup.holdout)

    trial = ControlTrial(
        seed=spec.seed,
        error_M=holdout_error(setup.theta_M),
        error_S=holdout_error(theta_S),
        error_S_tuned=holdout_error(_fine_tuned(setup, tracker, theta_S, tuner)),
        error_GT=holdout_error(theta_GT),
        error_GT_tuned=holdout_error(_fine_tuned(setup, tracker, theta_GT, tuner)),
    )
    logging.info("Control trial %d: %s", trial.seed, trial)
    return trial
