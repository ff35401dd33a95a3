"""Energy-aware co-scheduling policies and simulator for multi-GPU NUMA nodes."""

from .engine import SimResult, effective_runtime, simulate
from .model import (
    Application,
    ModeProfile,
    Platform,
    PolicyConfig,
    WorkloadError,
    WorkloadSpec,
    load_workload,
    validate,
)
from .oracle import OraclePlan, replay, solve
from .perfmodel import ModeEstimate, amortization_time, estimate_modes, predict_t_norm
from .policy import Action, SchedulerView, enumerate_actions, score, select_action

__all__ = [
    "Action",
    "Application",
    "ModeEstimate",
    "ModeProfile",
    "OraclePlan",
    "Platform",
    "PolicyConfig",
    "SchedulerView",
    "SimResult",
    "WorkloadError",
    "WorkloadSpec",
    "amortization_time",
    "effective_runtime",
    "enumerate_actions",
    "estimate_modes",
    "load_workload",
    "predict_t_norm",
    "replay",
    "score",
    "select_action",
    "simulate",
    "solve",
    "validate",
]

__version__ = "0.1.0"
