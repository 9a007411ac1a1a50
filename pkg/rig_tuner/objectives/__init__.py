from .analytic_dvhat import (
    AnalyticDvhat,
    analytic_dvhat_additive,
    analytic_dvhat_rig_scaled,
    diagnostic_lvhat,
    make_analytic_dvhat,
)
from .direct_fit import DirectFitResult, direct_fit, direct_loss, stack_pairs
from .loss_breakdown import LossBreakdown
from .objective import (
    PairJacobians,
    eval_objective,
    evaluate_pairs,
    grad_objective,
    objective_gradient,
    summarize,
)
from .objective_config import GeometryTarget, ObjectiveConfig, SpuriousTerm, TrackerVariant
from .pair_evaluation import PairEvaluation, PairSetup, evaluate_pair, prepare_pairs

__all__ = [
    "AnalyticDvhat",
    "DirectFitResult",
    "GeometryTarget",
    "LossBreakdown",
    "ObjectiveConfig",
    "PairEvaluation",
    "PairJacobians",
    "PairSetup",
    "SpuriousTerm",
    "TrackerVariant",
    "analytic_dvhat_additive",
    "analytic_dvhat_rig_scaled",
    "diagnostic_lvhat",
    "direct_fit",
    "direct_loss",
    "eval_objective",
    "evaluate_pair",
    "evaluate_pairs",
    "grad_objective",
    "make_analytic_dvhat",
    "objective_gradient",
    "prepare_pairs",
    "stack_pairs",
    "summarize",
]
