"""Sparse convex-hull data selection, integerization and gradient-reuse schedules."""
from .caratheodory import caratheodory_reduce, find_affine_dependency
from .errors import ContractError, NumericalError, PoolFormatError
from .frank_wolfe import FWConfig, FWResult, StopReason, frank_wolfe
from .geometry import CandidatePool, SimplexWeights, as_vector, normalize_rows, reconstruction_error
from .integerize import (
    FidelityReport,
    SupportMultiset,
    brute_force_integerize,
    fidelity,
    integerize,
    pad_by_weights,
)
from .pipeline import SelectionRequest, SelectionResult, hullft_select, knn_preselect, pca_select
from .schedule import (
    Action,
    GroupedSequence,
    ScheduleStats,
    TrainingSchedule,
    build_reuse_schedule,
    consecutive_group,
    global_dedup,
    schedule_from_groups,
)
from .toy_trainer import AdamState, ToyModel, adam_step, grad_reuse_train, plain_train

__version__ = "0.1.0"

__all__ = [
    "Action",
    "adam_step",
    "AdamState",
    "as_vector",
    "brute_force_integerize",
    "build_reuse_schedule",
    "CandidatePool",
    "caratheodory_reduce",
    "consecutive_group",
    "ContractError",
    "fidelity",
    "FidelityReport",
    "frank_wolfe",
    "find_affine_dependency",
    "FWConfig",
    "FWResult",
    "global_dedup",
    "grad_reuse_train",
    "GroupedSequence",
    "hullft_select",
    "integerize",
    "knn_preselect",
    "normalize_rows",
    "NumericalError",
    "pad_by_weights",
    "pca_select",
    "plain_train",
    "PoolFormatError",
    "reconstruction_error",
    "schedule_from_groups",
    "ScheduleStats",
    "SelectionRequest",
    "SelectionResult",
    "SimplexWeights",
    "StopReason",
    "SupportMultiset",
    "ToyModel",
    "TrainingSchedule",
]
