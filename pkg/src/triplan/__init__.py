"""Planner and simulator for 3D-parallel (tensor/pipeline/data) transformer training."""

from .analytic import (
    RatioSet,
    TrainBudget,
    bubble_fraction,
    data_ratio,
    data_ratio_approx,
    petaflops_days,
    pipeline_ratio,
    ratio_set,
    tensor_ratio,
    train_budget,
)
from .calib import LabelSet, ScoreTable, calibrated_scores, label_scores, predict
from .model import (
    ClusterShape,
    Constraint,
    ConstraintError,
    ModelShape,
    ParallelConfig,
    flops_per_token,
    memory_per_gpu,
    param_count,
    validate,
)
from .pipesim import PipelineTrace, StageTiming, measured_bubble, peak_in_flight, simulate
from .planner import MemoryModel, PlanQuery, RankedPlan, enumerate_configs, rank, score
from .schedule import SchedulePoint, ScheduleSpec, batch_at, emit, lr_at

__version__ = "0.1.0"
