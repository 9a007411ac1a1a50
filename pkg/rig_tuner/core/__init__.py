from .fine_tuner import FineTuner, fine_tune
from .optimization_report import IterationRecord, OptimizationReport, TrajectorySample
from .optimizer_config import (
    DiffConfig,
    DvhatSource,
    LineSearch,
    OptimizerConfig,
)
from .pipeline import (
    ExpressionErrors,
    PipelineConfig,
    PipelineMode,
    PipelineReport,
    StageSummary,
    expression_errors,
    run_pipeline,
)
from .stages import (
    DEFAULT_SERIALIZE_GROUPS,
    StageConfig,
    StageId,
    StageOutcome,
    StageResult,
    default_stage,
    primary_acceptance,
    run_stage,
    score_samples,
    select_best_sample,
)
from .tracker_differentiator import TrackerDifferentiator

__all__ = [
    "DEFAULT_SERIALIZE_GROUPS",
    "DiffConfig",
    "DvhatSource",
    "ExpressionErrors",
    "FineTuner",
    "IterationRecord",
    "LineSearch",
    "OptimizationReport",
    "OptimizerConfig",
    "PipelineConfig",
    "PipelineMode",
    "PipelineReport",
    "StageConfig",
    "StageId",
    "StageOutcome",
    "StageResult",
    "StageSummary",
    "TrackerDifferentiator",
    "TrajectorySample",
    "default_stage",
    "expression_errors",
    "fine_tune",
    "primary_acceptance",
    "run_pipeline",
    "run_stage",
    "score_samples",
    "select_best_sample",
]
