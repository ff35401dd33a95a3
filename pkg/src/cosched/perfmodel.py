"""Relative runtime/energy estimates per GPU-count mode from profiling counters.

Only the profiled DRAM utilization and busy power are read here; the true
runtime stored alongside a profile is simulator ground truth and must stay
invisible to the online policy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

from .model import Application, PolicyConfig

log = logging.getLogger(__name__)

# Slack on the tolerance test so a mode sitting exactly at 1 + tau survives
# floating-point round-off in the normalization.
_TOL_EPS = 1e-9


class PerfModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModeEstimate:
    app_id: str
    gpu_count: int
    t_norm: float
    e_proxy: float
    e_norm: float
    within_tolerance: bool


RuntimeModel = Callable[[int, float], float]


def throughput_runtime(gpu_count: int, dram_util: float) -> float:
    """Runtime proxy inversely proportional to aggregate memory throughput."""
    return 1.0 / (gpu_count * dram_util)


def usable_profiles(app: Application):
    return [p for p in app.profiles if p.gpu_count in app.feasible_gpu_counts and p.dram_util > 0]


def predict_t_norm(app: Application, model: RuntimeModel = throughput_runtime) -> dict[int, float]:
    """Map each profiled GPU count to its runtime relative to the fastest predicted mode.

    Modes whose DRAM utilization is zero carry no signal and are left out.
    """
    usable = usable_profiles(app)
    skipped = sorted(p.gpu_count for p in app.profiles if p.dram_util <= 0)
    if skipped:
        log.warning("%s: no DRAM signal for GPU count(s) %s; excluded", app.app_id, skipped)
    if not usable:
        raise PerfModelError(f"{app.app_id}: no usable profiling signal")
    raw = {p.gpu_count: model(p.gpu_count, p.dram_util) for p in usable}
    best = min(raw.values())
    return {g: r / best for g, r in sorted(raw.items())}


def estimate_modes(app: Application, cfg: PolicyConfig, model: RuntimeModel = throughput_runtime) -> list[ModeEstimate]:
    t_norm = predict_t_norm(app, model)
    e_proxy = {g: app.profile(g).busy_power * t for g, t in t_norm.items()}
    e_min = min(e_proxy.values())
    limit = 1.0 + cfg.tau
    return [
        ModeEstimate(
            app_id=app.app_id,
            gpu_count=g,
            t_norm=t,
            e_proxy=e_proxy[g],
            e_norm=e_proxy[g] / e_min,
            within_tolerance=t <= limit * (1 + _TOL_EPS),
        )
        for g, t in t_norm.items()
    ]


def amortization_time(profiling_energy: float, power_delta: float) -> float:
    """Seconds of execution after which a power reduction pays back the profiling energy."""
    if not power_delta > 0:
        raise PerfModelError("no amortization path: power delta must be positive")
    return profiling_energy / power_delta
