"""Exact offline energy-minimal schedule by branch-and-bound.

Decisions happen only at t=0 and at completion events. At each event the
search branches on every feasible launch set, plus launching nothing when a
job is still running. With every job present at t=0 and no preemption,
launching between events is never better, so this tree covers the schedules
worth considering.

The incumbent is seeded with the online policies' schedules, which all live
inside the same decision tree.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from itertools import combinations, product
from pathlib import Path
from typing import Optional

from .engine import EngineFault, NodeState, SimResult, result_from_state, run_policy, simulate
from .model import PolicyConfig, WorkloadSpec
from .policy import BASELINE_KINDS, Policy, SchedulerView, make_action

_REL_EPS = 1e-12

Decision = tuple[int, tuple[tuple[str, int], ...]]


class ReplayError(RuntimeError):
    pass


@dataclass
class OraclePlan:
    decisions: list[Decision]
    objective_energy_j: float
    objective_makespan_s: float
    complete: bool = True
    nodes_explored: int = 0

    def to_dict(self) -> dict:
        return {
            "decisions": [
                {"event_index": idx, "launch": [{"app_id": a, "gpu_count": g} for a, g in launch]}
                for idx, launch in self.decisions
            ],
            "objective_energy_j": self.objective_energy_j,
            "objective_makespan_s": self.objective_makespan_s,
            "complete": self.complete,
            "nodes_explored": self.nodes_explored,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OraclePlan":
        decisions = [
            (int(x["event_index"]), tuple(sorted((str(m["app_id"]), int(m["gpu_count"])) for m in x["launch"])))
            for x in d["decisions"]
        ]
        return cls(
            decisions=decisions,
            objective_energy_j=float(d.get("objective_energy_j", float("nan"))),
            objective_makespan_s=float(d.get("objective_makespan_s", float("nan"))),
            complete=bool(d.get("complete", True)),
            nodes_explored=int(d.get("nodes_explored", 0)),
        )


def save_plan(plan: OraclePlan, path) -> None:
    Path(path).write_text(json.dumps(plan.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_plan(path) -> OraclePlan:
    return OraclePlan.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class ScriptedPolicy(Policy):
    """Emits a precomputed launch set at each listed event index."""

    kind = "oracle_replay"

    def __init__(self, decisions):
        self.pending = {}
        for idx, launch in decisions:
            if idx in self.pending:
                raise ReplayError(f"event {idx}: more than one decision")
            self.pending[idx] = tuple(launch)

    def decide(self, view: SchedulerView):
        launch = self.pending.pop(view.event_index, None)
        if launch is None:
            return None
        return make_action(launch)


def replay(plan: OraclePlan, spec: WorkloadSpec, include_profiling_energy: bool = False) -> SimResult:
    policy = ScriptedPolicy(plan.decisions)
    state = NodeState(spec)
    try:
        run_policy(state, policy)
    except EngineFault as e:
        raise ReplayError(f"event {state.event_index}: {e}") from None
    if policy.pending:
        raise ReplayError(f"plan decisions never reached at event(s) {sorted(policy.pending)}")
    return result_from_state(state, "oracle_replay", include_profiling_energy)


def launch_sets(state: NodeState) -> list[tuple[tuple[str, int], ...]]:
    """Every launch set feasible at the current event, in sorted order."""
    g_free = state.g_free
    apps = sorted(state.waiting)
    modes = {a: sorted(g for g in state.spec.app(a).feasible_gpu_counts if g <= g_free) for a in apps}
    apps = [a for a in apps if modes[a]]
    out = []
    for size in range(1, min(state.free_domains, len(apps)) + 1):
        for subset in combinations(apps, size):
            for gs in product(*(modes[a] for a in subset)):
                if sum(gs) <= g_free:
                    out.append(tuple(zip(subset, gs)))
    out.sort()
    if state.running:
        out.append(())
    return out


class _Budget(Exception):
    pass


class _Search:
    def __init__(self, spec: WorkloadSpec, max_nodes: Optional[int], time_budget_s: Optional[float]):
        self.spec = spec
        self.max_nodes = max_nodes
        self.deadline = None if time_budget_s is None else time.monotonic() + time_budget_s
        self.nodes = 0
        self.best_energy = float("inf")
        self.best_plan: Optional[tuple[Decision, ...]] = None
        self.min_active = {
            a.app_id: min(p.true_runtime * p.busy_power for p in a.profiles) for a in spec.applications
        }

    def offer(self, energy: float, plan: tuple[Decision, ...]) -> None:
        tol = _REL_EPS * max(abs(self.best_energy), 1.0) if self.best_plan is not None else 0.0
        if self.best_plan is None or energy < self.best_energy - tol or (
            energy <= self.best_energy + tol and plan < self.best_plan
        ):
            self.best_energy = energy
            self.best_plan = plan

    def lower_bound(self, state: NodeState) -> float:
        return state.committed_energy() + sum(self.min_active[a] for a in state.waiting)

    def dfs(self, state: NodeState) -> None:
        self.nodes += 1
        if self.max_nodes is not None and self.nodes > self.max_nodes:
            raise _Budget
        if self.deadline is not None and self.nodes % 256 == 0 and time.monotonic() > self.deadline:
            raise _Budget
        if state.done:
            self.offer(state.committed_energy(), tuple(state.decisions))
            return
        if self.lower_bound(state) > self.best_energy * (1 + _REL_EPS):
            return
        for launch in launch_sets(state):
            child = state.clone()
            if launch:
                child.launch(launch)
            child.advance()
            self.dfs(child)


def _seed_runs(spec: WorkloadSpec) -> list[SimResult]:
    runs = []
    for kind in ("ecosched",) + BASELINE_KINDS:
        try:
            runs.append(simulate(spec, PolicyConfig(kind=kind)))
        except Exception:  # a seed is only a head start; the search stands alone
            continue
    return runs


def solve(spec: WorkloadSpec, max_nodes: Optional[int] = None, time_budget_s: Optional[float] = None) -> OraclePlan:
    """Energy-minimal plan; ``complete`` is False when a limit cut the search short."""
    if not spec.applications:
        return OraclePlan([], 0.0, 0.0, True, 0)
    search = _Search(spec, max_nodes, time_budget_s)
    for run in _seed_runs(spec):
        state = NodeState(spec)
        run_policy(state, ScriptedPolicy(run.trace.decisions))
        state_energy = state.committed_energy()
        search.offer(state_energy, tuple(run.trace.decisions))
    complete = True
    try:
        search.dfs(NodeState(spec))
    except _Budget:
        complete = False
    decisions = list(search.best_plan)
    result = replay(OraclePlan(decisions, 0.0, 0.0), spec)
    return OraclePlan(
        decisions=decisions,
        objective_energy_j=result.total_energy_j,
        objective_makespan_s=result.makespan_s,
        complete=complete,
        nodes_explored=search.nodes,
    )
