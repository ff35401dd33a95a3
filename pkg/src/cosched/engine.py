"""Deterministic discrete-event simulation of one multi-GPU node.

The policy is consulted at t=0 and after every completion, repeatedly, until
it declines to launch anything. Energy is integrated piecewise: launched modes
draw their profiled busy power, every unallocated GPU draws idle power from
t=0 to the makespan.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Optional

from .model import Application, PolicyConfig, WorkloadSpec
from .policy import Policy, SchedulerView, make_policy


class EngineFault(RuntimeError):
    """A policy produced something the node cannot execute."""


def effective_runtime(app: Application, gpu_count: int, numa_span: bool, corunners_present: bool) -> float:
    try:
        t = app.profile(gpu_count).true_runtime
    except KeyError as e:
        raise EngineFault(str(e.args[0])) from None
    if numa_span:
        t *= app.cross_numa_slowdown
    if corunners_present:
        t *= app.corun_slowdown
    return t


@dataclass
class Job:
    app_id: str
    gpu_count: int
    gpus: tuple[int, ...]
    numa_domain: int
    start: float
    completion: float
    busy_power: float
    cross_numa: bool
    corun: bool = False


@dataclass(frozen=True)
class TraceEvent:
    time: float
    kind: str  # "launch" | "finish"
    app_id: str
    gpu_count: int
    numa_domain: int
    gpus: tuple[int, ...]
    event_index: int


@dataclass(frozen=True)
class Interval:
    t_start: float
    t_end: float
    running: tuple[tuple[str, tuple[int, ...]], ...]
    busy_gpus: int
    idle_gpus: int
    active_power_w: float
    idle_power_w: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class AppRecord:
    app_id: str
    gpu_count: int
    gpus: tuple[int, ...]
    numa_domain: int
    start_s: float
    end_s: float
    runtime_s: float
    busy_power_w: float
    active_energy_j: float
    cross_numa: bool
    corun: bool


@dataclass
class ScheduleTrace:
    total_gpus: int
    events: list[TraceEvent]
    intervals: list[Interval]
    makespan: float
    per_app: dict[str, AppRecord]
    decisions: list[tuple[int, tuple[tuple[str, int], ...]]]


@dataclass
class SimResult:
    policy: str
    trace: ScheduleTrace
    total_energy_j: float
    active_energy_j: float
    idle_energy_j: float
    makespan_s: float
    edp: float
    per_app_perf_loss: dict[str, float]
    profiling_energy_j: float = 0.0
    profiling_included: bool = False


class NodeState:
    """Mutable node state; the oracle clones it to branch."""

    def __init__(self, spec: WorkloadSpec):
        self.spec = spec
        pf = spec.platform
        self.M = pf.total_gpus
        self.K = pf.numa_domains
        self.clock = 0.0
        self.event_index = 0
        self.waiting: list[str] = list(spec.app_ids)
        self.running: list[Job] = []
        self.finished: list[Job] = []
        self.gpu_busy = [False] * self.M
        self.domain_busy = [False] * self.K
        self.idle_energy = 0.0  # integrated up to self.clock
        self.events: list[TraceEvent] = []
        self.decisions: list[tuple[int, tuple[tuple[str, int], ...]]] = []
        self._apps = {a.app_id: a for a in spec.applications}

    def clone(self) -> "NodeState":
        other = copy.copy(self)
        other.waiting = list(self.waiting)
        other.running = [copy.copy(j) for j in self.running]
        other.finished = list(self.finished)
        other.gpu_busy = list(self.gpu_busy)
        other.domain_busy = list(self.domain_busy)
        other.events = list(self.events)
        other.decisions = list(self.decisions)
        return other

    @property
    def g_free(self) -> int:
        return self.gpu_busy.count(False)

    @property
    def free_domains(self) -> int:
        return self.domain_busy.count(False)

    @property
    def done(self) -> bool:
        return not self.waiting and not self.running

    def view(self, estimates=None) -> SchedulerView:
        w = self.spec.window_size or len(self.waiting)
        return SchedulerView(
            g_free=self.g_free,
            free_numa_domains=self.free_domains,
            total_gpus=self.M,
            waiting=tuple(self.waiting[:w]),
            estimates=estimates or {},
            running=len(self.running),
            event_index=self.event_index,
            clock=self.clock,
        )

    def check(self, assignments) -> Optional[str]:
        """Reason the launch set is infeasible right now, or None."""
        if not assignments:
            return "empty launch set"
        ids = [a for a, _ in assignments]
        if len(set(ids)) != len(ids):
            return "duplicate application in launch set"
        for aid, g in assignments:
            if aid not in self.waiting:
                return f"{aid} is not waiting"
            if g not in self._apps[aid].feasible_gpu_counts:
                return f"{aid} has no {g}-GPU mode"
        need = sum(g for _, g in assignments)
        if need > self.g_free:
            return f"needs {need} GPUs, {self.g_free} free"
        if len(assignments) > self.free_domains:
            return f"needs {len(assignments)} NUMA domains, {self.free_domains} free"
        return None

    def launch(self, assignments) -> None:
        assignments = tuple(sorted(assignments))
        why = self.check(assignments)
        if why is not None:
            raise EngineFault(f"infeasible action at t={self.clock:g} (event {self.event_index}): {why}")
        new = []
        for aid, g in assignments:
            app = self._apps[aid]
            dom = self.domain_busy.index(False)
            self.domain_busy[dom] = True
            gpus = tuple(i for i, busy in enumerate(self.gpu_busy) if not busy)[:g]
            for i in gpus:
                self.gpu_busy[i] = True
            span = any(self.spec.platform.numa_domain_of(i) != dom for i in gpus)
            job = Job(
                app_id=aid,
                gpu_count=g,
                gpus=gpus,
                numa_domain=dom,
                start=self.clock,
                completion=0.0,
                busy_power=app.profile(g).busy_power,
                cross_numa=span,
            )
            job.completion = self.clock + effective_runtime(app, g, span, False)
            self.waiting.remove(aid)
            self.running.append(job)
            new.append(job)
            self.events.append(TraceEvent(self.clock, "launch", aid, g, dom, gpus, self.event_index))
        if len(self.running) >= 2:
            for job in self.running:
                if not job.corun:
                    job.corun = True
                    job.completion = job.start + effective_runtime(
                        self._apps[job.app_id], job.gpu_count, job.cross_numa, True
                    )
        if self.decisions and self.decisions[-1][0] == self.event_index:
            idx, prev = self.decisions[-1]
            self.decisions[-1] = (idx, tuple(sorted(prev + assignments)))
        else:
            self.decisions.append((self.event_index, assignments))

    def advance(self) -> None:
        """Move the clock to the next completion and release finished jobs."""
        if not self.running:
            raise EngineFault("advance with nothing running")
        t = min(j.completion for j in self.running)
        idle = self.g_free
        self.idle_energy += idle * self.spec.platform.idle_power_per_gpu * (t - self.clock)
        self.clock = t
        done = sorted((j for j in self.running if j.completion == t), key=lambda j: j.app_id)
        for job in done:
            self.running.remove(job)
            self.finished.append(job)
            for i in job.gpus:
                self.gpu_busy[i] = False
            self.domain_busy[job.numa_domain] = False
            self.events.append(TraceEvent(t, "finish", job.app_id, job.gpu_count, job.numa_domain, job.gpus, self.event_index))
        self.event_index += 1

    def committed_energy(self) -> float:
        """Energy already locked in: idle energy so far plus launched jobs' active energy.

        Running jobs may still be stretched by a later co-runner, so this never
        overestimates the final total.
        """
        jobs = self.finished + self.running
        return self.idle_energy + sum(j.busy_power * (j.completion - j.start) for j in jobs)


def run_policy(state: NodeState, policy: Policy, max_launches_per_event: int = 10_000) -> None:
    estimates = getattr(policy, "estimates", None)
    while not state.done:
        for _ in range(max_launches_per_event):
            action = policy.decide(state.view(estimates))
            if action is None:
                break
            state.launch(action.assignments())
        else:
            raise EngineFault("policy never stopped launching")
        if not state.running:
            if state.waiting:
                raise EngineFault(
                    f"policy {policy.kind} idles an empty node at t={state.clock:g} with "
                    f"{len(state.waiting)} job(s) waiting"
                )
            break
        state.advance()


def build_trace(state: NodeState) -> ScheduleTrace:
    jobs = sorted(state.finished, key=lambda j: (j.start, j.app_id))
    M = state.M
    p_idle = state.spec.platform.idle_power_per_gpu
    makespan = max((j.completion for j in jobs), default=0.0)
    cuts = sorted({0.0, makespan} | {j.start for j in jobs} | {j.completion for j in jobs})
    intervals = []
    for t0, t1 in zip(cuts, cuts[1:]):
        live = [j for j in jobs if j.start <= t0 and j.completion >= t1]
        busy = sum(j.gpu_count for j in live)
        intervals.append(
            Interval(
                t_start=t0,
                t_end=t1,
                running=tuple((j.app_id, j.gpus) for j in sorted(live, key=lambda j: j.app_id)),
                busy_gpus=busy,
                idle_gpus=M - busy,
                active_power_w=sum(j.busy_power for j in live),
                idle_power_w=(M - busy) * p_idle,
            )
        )
    per_app = {}
    for j in jobs:
        rt = j.completion - j.start
        per_app[j.app_id] = AppRecord(
            app_id=j.app_id,
            gpu_count=j.gpu_count,
            gpus=j.gpus,
            numa_domain=j.numa_domain,
            start_s=j.start,
            end_s=j.completion,
            runtime_s=rt,
            busy_power_w=j.busy_power,
            active_energy_j=j.busy_power * rt,
            cross_numa=j.cross_numa,
            corun=j.corun,
        )
    return ScheduleTrace(
        total_gpus=M,
        events=list(state.events),
        intervals=intervals,
        makespan=makespan,
        per_app=per_app,
        decisions=list(state.decisions),
    )


def profiling_energy(spec: WorkloadSpec) -> float:
    return sum(p.profiling_energy for a in spec.applications for p in a.profiles)


def result_from_state(state: NodeState, policy_kind: str, include_profiling_energy: bool = False) -> SimResult:
    trace = build_trace(state)
    active = sum(r.active_energy_j for r in trace.per_app.values())
    idle = sum(iv.idle_power_w * iv.duration for iv in trace.intervals)
    prof = profiling_energy(state.spec) if policy_kind == "ecosched" else 0.0
    include = include_profiling_energy and prof > 0
    total = active + idle + (prof if include else 0.0)
    loss = {}
    for aid, rec in trace.per_app.items():
        solo = state.spec.app(aid).min_true_runtime()
        loss[aid] = 100.0 * (rec.runtime_s - solo) / solo
    return SimResult(
        policy=policy_kind,
        trace=trace,
        total_energy_j=total,
        active_energy_j=active,
        idle_energy_j=idle,
        makespan_s=trace.makespan,
        edp=total * trace.makespan,
        per_app_perf_loss=loss,
        profiling_energy_j=prof,
        profiling_included=include,
    )


def simulate(
    spec: WorkloadSpec,
    cfg: PolicyConfig,
    policy: Optional[Policy] = None,
    include_profiling_energy: bool = False,
) -> SimResult:
    """Run one policy over the whole window and account energy and time."""
    if policy is None:
        policy = make_policy(spec, cfg)
    state = NodeState(spec)
    run_policy(state, policy)
    return result_from_state(state, policy.kind, include_profiling_energy)
