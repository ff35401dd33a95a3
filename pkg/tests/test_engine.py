import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cosched.engine import EngineFault, NodeState, effective_runtime, simulate
from cosched.export import events_json, trace_csv
from cosched.fixtures import load_fixture, random_workload
from cosched.model import Application, ModeProfile, Platform, PolicyConfig, WorkloadSpec
from cosched.policy import Policy, make_action
from invariants import capacity_violations, conservation_violations, max_overlap

KINDS = ("ecosched", "sequential_max_gpu", "sequential_optimal_gpu", "marble_like")


def one_job(M=4, K=1, g=2, runtime=100.0, power=300.0, idle=70.0, corun=1.0, cross=1.0, aid="j"):
    prof = ModeProfile(aid, g, runtime, power, 0.5)
    app = Application(aid, frozenset({g}), (prof,), corun, cross)
    return WorkloadSpec(Platform(M, K, idle), (app,), 1)


def test_single_job_energy():
    r = simulate(one_job(), PolicyConfig())
    assert r.active_energy_j == 30000
    assert r.idle_energy_j == 14000
    assert r.total_energy_j == 44000
    assert r.makespan_s == 100
    assert r.edp == pytest.approx(4.4e6)


def test_empty_workload():
    spec = WorkloadSpec(Platform(4, 2, 70.0), (), 0)
    r = simulate(spec, PolicyConfig())
    assert r.total_energy_j == 0 and r.makespan_s == 0
    assert r.trace.intervals == []


def test_effective_runtime():
    app = one_job(corun=1.08, cross=1.05).applications[0]
    assert effective_runtime(app, 2, False, False) == 100.0
    assert effective_runtime(app, 2, True, False) == pytest.approx(105.0)
    assert effective_runtime(app, 2, True, True) == pytest.approx(113.4)
    with pytest.raises(EngineFault):
        effective_runtime(app, 3, False, False)


def test_cross_numa_span_stretches_runtime():
    # 3 of 4 GPUs from domain 0 spill into domain 1
    spec = one_job(M=4, K=2, g=3, cross=1.05)
    r = simulate(spec, PolicyConfig())
    rec = r.trace.per_app["j"]
    assert rec.gpus == (0, 1, 2) and rec.cross_numa
    assert rec.runtime_s == pytest.approx(105.0)


def test_corun_applies_retroactively():
    a = Application("a", frozenset({2}), (ModeProfile("a", 2, 100.0, 200.0, 0.5),), corun_slowdown=1.1)
    b = Application("b", frozenset({2}), (ModeProfile("b", 2, 10.0, 200.0, 0.5),))
    spec = WorkloadSpec(Platform(4, 2, 0.0), (a, b), 2)

    state = NodeState(spec)
    state.launch([("a", 2)])
    assert state.running[0].completion == 100.0
    state.launch([("b", 2)])
    assert state.running[0].completion == pytest.approx(110.0)


def test_infeasible_action_faults():
    state = NodeState(one_job(M=4, K=1, g=2))
    with pytest.raises(EngineFault, match="no 5-GPU mode"):
        state.launch([("j", 5)])
    apps = tuple(Application(a, frozenset({3}), (ModeProfile(a, 3, 10.0, 1.0, 0.5),)) for a in "ab")
    state = NodeState(WorkloadSpec(Platform(4, 2, 0.0), apps, 2))
    with pytest.raises(EngineFault, match="needs 6 GPUs"):
        state.launch([("a", 3), ("b", 3)])
    state = NodeState(WorkloadSpec(Platform(4, 1, 0.0), apps, 2))
    state.launch([("a", 3)])
    with pytest.raises(EngineFault, match="NUMA domains|GPUs"):
        state.launch([("b", 3)])


def test_idle_empty_node_is_a_fault():
    class Lazy(Policy):
        kind = "lazy"

        def decide(self, view):
            return None

    with pytest.raises(EngineFault, match="idles an empty node"):
        simulate(one_job(), PolicyConfig(), policy=Lazy())


def test_case_study_schedules():
    spec = load_fixture("case_study")
    eco = simulate(spec, PolicyConfig())
    got = {a: (r.gpu_count, r.start_s, r.end_s) for a, r in eco.trace.per_app.items()}
    assert got == {
        "gpt2": (2, 0.0, 108.0),
        "pot3d": (2, 0.0, 220.0),
        "simpleP2P": (2, 108.0, 148.0),
        "vgg16": (1, 148.0, 238.0),
        "resnet50": (3, 220.0, 472.0),
        "vgg19": (1, 238.0, 338.0),
    }
    marble = simulate(spec, PolicyConfig(kind="marble_like"))
    got = {a: (r.gpu_count, r.start_s, r.end_s) for a, r in marble.trace.per_app.items()}
    assert got == {
        "simpleP2P": (2, 0.0, 40.0),
        "vgg16": (2, 0.0, 85.0),
        "vgg19": (2, 40.0, 135.0),
        "pot3d": (4, 135.0, 335.0),
        "resnet50": (4, 335.0, 575.0),
        "gpt2": (3, 575.0, 675.0),
    }


def test_sequential_max_three_jobs():
    apps = tuple(
        Application(a, frozenset({1, 4}), (ModeProfile(a, 1, 50.0, 100.0, 0.9), ModeProfile(a, 4, 20.0, 350.0, 0.5)))
        for a in ("x", "y", "z")
    )
    r = simulate(WorkloadSpec(Platform(4, 2, 60.0), apps, 3), PolicyConfig(kind="sequential_max_gpu"))
    launches = [e for e in r.trace.events if e.kind == "launch"]
    assert [(e.app_id, e.gpu_count, e.time) for e in launches] == [("x", 4, 0.0), ("y", 4, 20.0), ("z", 4, 40.0)]
    assert r.idle_energy_j == 0


def test_window_slides_over_queue():
    apps = tuple(Application(a, frozenset({1}), (ModeProfile(a, 1, 10.0, 100.0, 0.5),)) for a in "abc")
    seen = []

    class Recorder(Policy):
        kind = "recorder"

        def decide(self, view):
            seen.append(view.waiting)
            return make_action([(view.waiting[0], 1)]) if view.waiting and view.g_free else None

    simulate(WorkloadSpec(Platform(4, 4, 10.0), apps, 2), PolicyConfig(), policy=Recorder())
    assert seen[:3] == [("a", "b"), ("b", "c"), ("c",)]


def test_profiling_energy_flag():
    spec = load_fixture("case_study")
    base = simulate(spec, PolicyConfig())
    with_prof = simulate(spec, PolicyConfig(), include_profiling_energy=True)
    assert base.profiling_energy_j == with_prof.profiling_energy_j > 0
    assert with_prof.total_energy_j == pytest.approx(base.total_energy_j + base.profiling_energy_j)
    assert conservation_violations(with_prof, 4) == []


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=150, deadline=None)
@given(seeds, st.sampled_from(KINDS), st.booleans())
def test_conservation_and_capacity(seed, kind, slow):
    spec = random_workload(seed, slowdowns=slow)
    r = simulate(spec, PolicyConfig(kind=kind))
    M, K = spec.platform.total_gpus, spec.platform.numa_domains
    assert conservation_violations(r, M) == []
    assert capacity_violations(r, M, K) == []
    assert set(r.trace.per_app) == set(spec.app_ids)
    for rec in r.trace.per_app.values():
        app = spec.app(rec.app_id)
        assert rec.end_s == rec.start_s + effective_runtime(app, rec.gpu_count, rec.cross_numa, rec.corun)


@settings(max_examples=100, deadline=None)
@given(seeds, st.sampled_from(("sequential_max_gpu", "sequential_optimal_gpu")))
def test_sequential_never_overlaps(seed, kind):
    r = simulate(random_workload(seed, slowdowns=True), PolicyConfig(kind=kind))
    assert max_overlap(r) <= 1


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from(KINDS))
def test_replay_determinism(seed, kind):
    spec = random_workload(seed, slowdowns=True)
    a = simulate(spec, PolicyConfig(kind=kind))
    b = simulate(spec, PolicyConfig(kind=kind))
    assert trace_csv(a.trace) == trace_csv(b.trace)
    assert events_json(a.trace) == events_json(b.trace)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_seq_max_no_idle_when_all_jobs_use_every_gpu(seed):
    spec = random_workload(seed)
    M = spec.platform.total_gpus
    apps = tuple(
        Application(a.app_id, frozenset({M}), (ModeProfile(a.app_id, M, a.profiles[0].true_runtime, 500.0, 0.5),))
        for a in spec.applications
    )
    r = simulate(WorkloadSpec(spec.platform, apps, len(apps)), PolicyConfig(kind="sequential_max_gpu"))
    assert r.idle_energy_j == 0
