"""Core domain types and workload file handling.

A workload file describes one multi-GPU node (the platform) and an ordered
queue of applications, each with one profile per feasible GPU count. The
queue order is the FCFS order used by the sequential baselines.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

POLICY_KINDS = (
    "ecosched",
    "sequential_max_gpu",
    "sequential_optimal_gpu",
    "marble_like",
    "oracle_replay",
)

DEFAULT_LAMBDA = 1.0
DEFAULT_TAU = 0.10


class WorkloadError(Exception):
    """Raised when a workload file cannot be parsed or fails validation."""

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = violations or []


@dataclass(frozen=True)
class Platform:
    total_gpus: int
    numa_domains: int
    idle_power_per_gpu: float
    name: str = "node"

    def numa_domain_of(self, gpu_index: int) -> int:
        """NUMA domain owning a GPU; GPUs are split into contiguous blocks."""
        return gpu_index * self.numa_domains // self.total_gpus


@dataclass(frozen=True)
class ModeProfile:
    app_id: str
    gpu_count: int
    true_runtime: float  # ground truth, never shown to the online policy
    busy_power: float  # aggregate over all gpu_count GPUs
    dram_util: float  # mean per-GPU DRAM utilization in [0, 1]
    profiling_energy: float = 0.0
    profiling_duration: float = 0.0


@dataclass(frozen=True)
class Application:
    app_id: str
    feasible_gpu_counts: frozenset[int]
    profiles: tuple[ModeProfile, ...]
    corun_slowdown: float = 1.0
    cross_numa_slowdown: float = 1.0

    def profile(self, gpu_count: int) -> ModeProfile:
        for p in self.profiles:
            if p.gpu_count == gpu_count:
                return p
        raise KeyError(f"{self.app_id} has no profile for {gpu_count} GPU(s)")

    def fastest_gpu_count(self) -> int:
        """GPU count with the lowest true runtime; ties go to fewer GPUs."""
        best = min(self.profiles, key=lambda p: (p.true_runtime, p.gpu_count))
        return best.gpu_count

    def min_true_runtime(self) -> float:
        return min(p.true_runtime for p in self.profiles)


@dataclass(frozen=True)
class WorkloadSpec:
    platform: Platform
    applications: tuple[Application, ...]
    window_size: int

    def app(self, app_id: str) -> Application:
        for a in self.applications:
            if a.app_id == app_id:
                return a
        raise KeyError(app_id)

    @property
    def app_ids(self) -> tuple[str, ...]:
        return tuple(a.app_id for a in self.applications)


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "ecosched"
    lam: float = DEFAULT_LAMBDA
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}; expected one of {', '.join(POLICY_KINDS)}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be a finite value >= 0, got {self.lam}")
        if not (self.tau >= 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be a finite value >= 0, got {self.tau}")


def _nonneg(x: float) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x) and x >= 0


def validate(spec: WorkloadSpec) -> list[str]:
    """Return one description per violated invariant; empty when valid."""
    out: list[str] = []
    pf = spec.platform
    M, K = pf.total_gpus, pf.numa_domains
    if not (isinstance(M, int) and M >= 1):
        out.append(f"total_gpus must be a positive integer, got {M!r}")
    if not (isinstance(K, int) and K >= 1):
        out.append(f"numa_domains must be a positive integer, got {K!r}")
    if isinstance(M, int) and isinstance(K, int) and K > M:
        out.append("numa_domains exceeds total_gpus")
    if not _nonneg(pf.idle_power_per_gpu):
        out.append(f"idle_power_per_gpu must be >= 0, got {pf.idle_power_per_gpu!r}")

    n = len(spec.applications)
    if n == 0:
        if spec.window_size != 0:
            out.append("window_size must be 0 for an empty workload")
    elif not (isinstance(spec.window_size, int) and 1 <= spec.window_size <= n):
        out.append(f"window_size must be in [1, {n}], got {spec.window_size!r}")

    seen_ids: set[str] = set()
    for app in spec.applications:
        aid = app.app_id
        if aid in seen_ids:
            out.append(f"duplicate app_id {aid!r}")
        seen_ids.add(aid)
        if not app.feasible_gpu_counts:
            out.append(f"{aid}: feasible_gpu_counts is empty")
        if not (app.corun_slowdown >= 1):
            out.append(f"{aid}: corun_slowdown must be >= 1, got {app.corun_slowdown!r}")
        if not (app.cross_numa_slowdown >= 1):
            out.append(f"{aid}: cross_numa_slowdown must be >= 1, got {app.cross_numa_slowdown!r}")

        counts_seen: set[int] = set()
        for p in app.profiles:
            g = p.gpu_count
            where = f"{aid}@{g}"
            if p.app_id != aid:
                out.append(f"{where}: profile app_id {p.app_id!r} does not match application")
            if g in counts_seen:
                out.append(f"{where}: duplicate profile for ({aid}, {g})")
            counts_seen.add(g)
            if not (isinstance(g, int) and g >= 1):
                out.append(f"{where}: gpu_count must be a positive integer")
            elif isinstance(M, int) and g > M:
                out.append(f"{where}: gpu_count {g} exceeds total_gpus {M}")
            if g not in app.feasible_gpu_counts:
                out.append(f"{where}: profile for a gpu_count not listed as feasible")
            if not (_nonneg(p.true_runtime) and p.true_runtime > 0):
                out.append(f"{where}: true_runtime must be > 0")
            if not (_nonneg(p.busy_power) and p.busy_power > 0):
                out.append(f"{where}: busy_power must be > 0")
            if not (_nonneg(p.dram_util) and p.dram_util <= 1):
                out.append(f"{where}: dram_util out of [0,1]")
            if not _nonneg(p.profiling_energy):
                out.append(f"{where}: profiling_energy must be >= 0")
            if not _nonneg(p.profiling_duration):
                out.append(f"{where}: profiling_duration must be >= 0")
        for g in sorted(app.feasible_gpu_counts - counts_seen):
            out.append(f"{aid}: missing profile for gpu_count {g}")
    return out


# ---------------------------------------------------------------------------
# JSON (de)serialization

_PLATFORM_KEYS = {"total_gpus", "numa_domains", "idle_power_per_gpu_w", "name"}
_TOP_KEYS = {"platform", "window_size", "applications"}
_APP_KEYS = {"app_id", "corun_slowdown", "cross_numa_slowdown", "profiles"}
_PROFILE_KEYS = {
    "gpu_count",
    "true_runtime_s",
    "busy_power_w",
    "dram_util",
    "profiling_energy_j",
    "profiling_duration_s",
}


def _check_keys(obj: Any, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise WorkloadError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise WorkloadError(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = sorted(required - set(obj))
    if missing:
        raise WorkloadError(f"{where}: missing key(s) {', '.join(missing)}")


def _num(obj: dict, key: str, where: str) -> float:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise WorkloadError(f"{where}.{key}: expected a number, got {v!r}")
    return float(v)


def _int(obj: dict, key: str, where: str) -> int:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise WorkloadError(f"{where}.{key}: expected an integer, got {v!r}")
    return v


def workload_from_dict(data: Any) -> WorkloadSpec:
    """Build a spec from decoded JSON; structural errors raise, invariants are not checked."""
    _check_keys(data, _TOP_KEYS, _TOP_KEYS, "workload")
    pd = data["platform"]
    _check_keys(pd, _PLATFORM_KEYS, _PLATFORM_KEYS - {"name"}, "platform")
    platform = Platform(
        total_gpus=_int(pd, "total_gpus", "platform"),
        numa_domains=_int(pd, "numa_domains", "platform"),
        idle_power_per_gpu=_num(pd, "idle_power_per_gpu_w", "platform"),
        name=str(pd.get("name", "node")),
    )
    if not isinstance(data["applications"], list):
        raise WorkloadError("applications: expected an array")
    apps = []
    for i, ad in enumerate(data["applications"]):
        where = f"applications[{i}]"
        _check_keys(ad, _APP_KEYS, {"app_id", "profiles"}, where)
        aid = ad["app_id"]
        if not isinstance(aid, str) or not aid:
            raise WorkloadError(f"{where}.app_id: expected a non-empty string")
        if not isinstance(ad["profiles"], list):
            raise WorkloadError(f"{where}.profiles: expected an array")
        profiles = []
        for j, prof in enumerate(ad["profiles"]):
            pw = f"{where}.profiles[{j}]"
            _check_keys(prof, _PROFILE_KEYS, _PROFILE_KEYS, pw)
            profiles.append(
                ModeProfile(
                    app_id=aid,
                    gpu_count=_int(prof, "gpu_count", pw),
                    true_runtime=_num(prof, "true_runtime_s", pw),
                    busy_power=_num(prof, "busy_power_w", pw),
                    dram_util=_num(prof, "dram_util", pw),
                    profiling_energy=_num(prof, "profiling_energy_j", pw),
                    profiling_duration=_num(prof, "profiling_duration_s", pw),
                )
            )
        apps.append(
            Application(
                app_id=aid,
                feasible_gpu_counts=frozenset(p.gpu_count for p in profiles),
                profiles=tuple(profiles),
                corun_slowdown=_num(ad, "corun_slowdown", where) if "corun_slowdown" in ad else 1.0,
                cross_numa_slowdown=_num(ad, "cross_numa_slowdown", where) if "cross_numa_slowdown" in ad else 1.0,
            )
        )
    return WorkloadSpec(platform=platform, applications=tuple(apps), window_size=_int(data, "window_size", "workload"))


def workload_to_dict(spec: WorkloadSpec) -> dict:
    pf = spec.platform
    return {
        "platform": {
            "name": pf.name,
            "total_gpus": pf.total_gpus,
            "numa_domains": pf.numa_domains,
            "idle_power_per_gpu_w": pf.idle_power_per_gpu,
        },
        "window_size": spec.window_size,
        "applications": [
            {
                "app_id": a.app_id,
                "corun_slowdown": a.corun_slowdown,
                "cross_numa_slowdown": a.cross_numa_slowdown,
                "profiles": [
                    {
                        "gpu_count": p.gpu_count,
                        "true_runtime_s": p.true_runtime,
                        "busy_power_w": p.busy_power,
                        "dram_util": p.dram_util,
                        "profiling_energy_j": p.profiling_energy,
                        "profiling_duration_s": p.profiling_duration,
                    }
                    for p in a.profiles
                ],
            }
            for a in spec.applications
        ],
    }


def parse_workload(text: str, source: str = "<string>") -> WorkloadSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise WorkloadError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    try:
        spec = workload_from_dict(data)
    except WorkloadError as e:
        raise WorkloadError(f"{source}: {e}") from None
    problems = validate(spec)
    if problems:
        raise WorkloadError(f"{source}: invalid workload: " + "; ".join(problems), problems)
    return spec


def load_workload(path: str | Path) -> WorkloadSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise WorkloadError(f"{path}: {e.strerror or e}") from None
    return parse_workload(text, str(path))


def dump_workload(spec: WorkloadSpec) -> str:
    return json.dumps(workload_to_dict(spec), indent=2) + "\n"


def save_workload(spec: WorkloadSpec, path: str | Path) -> None:
    Path(path).write_text(dump_workload(spec), encoding="utf-8")
