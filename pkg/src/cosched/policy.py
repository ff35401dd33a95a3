"""Action enumeration, scoring and selection, plus the baseline policies.

An action launches a set of distinct applications, each at one GPU count.
Every launched application takes one NUMA domain, so an action holds at most
as many modes as there are free domains. GPU counts may straddle domains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Mapping, Optional, Sequence

from .model import PolicyConfig, WorkloadSpec
from .perfmodel import ModeEstimate, estimate_modes

# Scores are compared after rounding so arithmetically equal scores that
# differ only by summation round-off fall through to the tie-break chain.
_SCORE_DIGITS = 12


class PolicyError(ValueError):
    pass


@dataclass(frozen=True)
class Mode:
    app_id: str
    gpu_count: int
    e_norm: Optional[float] = None  # unset for modes not chosen by score


@dataclass(frozen=True)
class Action:
    modes: tuple[Mode, ...]
    gpus_used: int
    r_energy: Optional[float] = None
    idle_frac: Optional[float] = None
    score: Optional[float] = None

    @property
    def app_ids(self) -> tuple[str, ...]:
        return tuple(m.app_id for m in self.modes)

    @property
    def gpu_counts(self) -> tuple[int, ...]:
        return tuple(m.gpu_count for m in self.modes)

    def assignments(self) -> tuple[tuple[str, int], ...]:
        return tuple((m.app_id, m.gpu_count) for m in self.modes)


def make_action(assignments: Sequence[tuple[str, int]]) -> Action:
    """Unscored action from (app_id, gpu_count) pairs, ordered by app_id."""
    modes = tuple(Mode(a, g) for a, g in sorted(assignments))
    return Action(modes=modes, gpus_used=sum(m.gpu_count for m in modes))


@dataclass(frozen=True)
class SchedulerView:
    """What a policy may see at a decision point.

    ``waiting`` lists the app_ids inside the current scheduling window in
    queue order; ``estimates`` holds Phase-I mode estimates, never ground truth.
    """

    g_free: int
    free_numa_domains: int
    total_gpus: int
    waiting: tuple[str, ...]
    estimates: Mapping[str, Sequence[ModeEstimate]] = field(default_factory=dict)
    running: int = 0
    event_index: int = 0
    clock: float = 0.0


def score(modes: Sequence[Mode], view: SchedulerView, lam: float) -> tuple[float, float, float]:
    """Energy regret, idle fraction and combined score of a candidate action."""
    r_energy = sum(m.e_norm - 1.0 for m in modes) / len(modes)
    used = sum(m.gpu_count for m in modes)
    idle = (view.g_free - used) / view.total_gpus
    return r_energy, idle, r_energy + lam * idle


def _candidate_modes(view: SchedulerView) -> dict[str, list[Mode]]:
    out = {}
    for aid in view.waiting:
        modes = [
            Mode(aid, e.gpu_count, e.e_norm)
            for e in sorted(view.estimates.get(aid, ()), key=lambda e: e.gpu_count)
            if e.within_tolerance and e.gpu_count <= view.g_free
        ]
        if modes:
            out[aid] = modes
    return out


def enumerate_actions(view: SchedulerView, lam: float = 1.0) -> list[Action]:
    """All feasible actions, sorted by (app_id tuple, gpu-count tuple)."""
    if view.g_free <= 0 or view.free_numa_domains <= 0:
        return []
    cands = _candidate_modes(view)
    apps = sorted(cands)
    actions = []
    for size in range(1, min(view.free_numa_domains, len(apps)) + 1):
        for subset in combinations(apps, size):
            for modes in product(*(cands[a] for a in subset)):
                used = sum(m.gpu_count for m in modes)
                if used > view.g_free:
                    continue
                r, idle, s = score(modes, view, lam)
                actions.append(Action(tuple(modes), used, r, idle, s))
    actions.sort(key=lambda a: (a.app_ids, a.gpu_counts))
    return actions


def _selection_key(a: Action):
    return (round(a.score, _SCORE_DIGITS), -a.gpus_used, -len(a.modes), a.app_ids, a.gpu_counts)


def select_action(view: SchedulerView, cfg: PolicyConfig) -> Optional[Action]:
    """Minimum-score feasible action, or None to wait."""
    actions = enumerate_actions(view, cfg.lam)
    if not actions:
        return None
    return min(actions, key=_selection_key)


# ---------------------------------------------------------------------------
# Policy objects used by the simulator. Each is called repeatedly at a
# decision point until it returns None.


class Policy:
    kind = "abstract"

    def decide(self, view: SchedulerView) -> Optional[Action]:
        raise NotImplementedError


class EcoSchedPolicy(Policy):
    """Score-based joint GPU-count and co-scheduling selection."""

    kind = "ecosched"

    def __init__(self, spec: WorkloadSpec, cfg: PolicyConfig):
        self.cfg = cfg
        self.estimates = {a.app_id: tuple(estimate_modes(a, cfg)) for a in spec.applications}

    def decide(self, view: SchedulerView) -> Optional[Action]:
        return select_action(view, self.cfg)


class SequentialPolicy(Policy):
    """FCFS, one job at a time; the head job starts only on an empty node."""

    def __init__(self, spec: WorkloadSpec, kind: str):
        self.kind = kind
        M = spec.platform.total_gpus
        self.counts = {}
        for app in spec.applications:
            if kind == "sequential_max_gpu":
                # M itself when profiled, otherwise the largest profiled count
                self.counts[app.app_id] = max(g for g in app.feasible_gpu_counts if g <= M)
            else:
                self.counts[app.app_id] = app.fastest_gpu_count()

    def decide(self, view: SchedulerView) -> Optional[Action]:
        if view.running or not view.waiting or view.free_numa_domains < 1:
            return None
        head = view.waiting[0]
        g = self.counts[head]
        if g > view.g_free:
            return None
        return make_action([(head, g)])


class MarbleLikePolicy(Policy):
    """Co-scheduling with every job pinned to its fastest GPU count.

    Approximates Marble: GPU counts are performance-oriented and the packer
    greedily maximizes the GPUs put to work at each decision point.
    """

    kind = "marble_like"

    def __init__(self, spec: WorkloadSpec):
        self.counts = {a.app_id: a.fastest_gpu_count() for a in spec.applications}
        self.order = {a.app_id: i for i, a in enumerate(spec.applications)}

    def decide(self, view: SchedulerView) -> Optional[Action]:
        fits = [a for a in view.waiting if self.counts[a] <= view.g_free]
        best = None
        best_key = None
        for size in range(1, min(view.free_numa_domains, len(fits)) + 1):
            for subset in combinations(fits, size):
                used = sum(self.counts[a] for a in subset)
                if used > view.g_free:
                    continue
                key = (-used, -size, sorted(self.order[a] for a in subset))
                if best_key is None or key < best_key:
                    best, best_key = subset, key
        if best is None:
            return None
        return make_action([(a, self.counts[a]) for a in best])


BASELINE_KINDS = ("sequential_max_gpu", "sequential_optimal_gpu", "marble_like")


def baseline_policy(kind: str, spec: WorkloadSpec) -> Policy:
    if kind in ("sequential_max_gpu", "sequential_optimal_gpu"):
        return SequentialPolicy(spec, kind)
    if kind == "marble_like":
        return MarbleLikePolicy(spec)
    raise PolicyError(f"unknown baseline policy kind {kind!r}")


def make_policy(spec: WorkloadSpec, cfg: PolicyConfig) -> Policy:
    if cfg.kind == "ecosched":
        return EcoSchedPolicy(spec, cfg)
    if cfg.kind == "oracle_replay":
        raise PolicyError("oracle_replay needs a plan; use oracle.replay()")
    return baseline_policy(cfg.kind, spec)
