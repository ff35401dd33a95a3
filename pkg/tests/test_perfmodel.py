from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cosched.fixtures import random_workload
from cosched.model import Application, ModeProfile, PolicyConfig
from cosched.perfmodel import PerfModelError, amortization_time, estimate_modes, predict_t_norm


def make_app(modes, aid="x"):
    """modes: {g: (dram_util, busy_power)}"""
    profiles = tuple(ModeProfile(aid, g, 100.0, p, u) for g, (u, p) in sorted(modes.items()))
    return Application(aid, frozenset(modes), profiles)


def test_single_mode():
    assert predict_t_norm(make_app({3: (0.4, 500)})) == {3: 1.0}


def test_two_modes_direct():
    t = predict_t_norm(make_app({1: (0.8, 100), 2: (0.5, 200)}))
    assert t == pytest.approx({1: 1.25, 2: 1.0}, rel=1e-12)


def test_three_modes_hand_computed():
    # r = 1/(g*u): 1/1.2, 1/1.14, 1/1.12 -> normalized by 1/1.2
    t = predict_t_norm(make_app({2: (0.6, 1), 3: (0.38, 1), 4: (0.28, 1)}))
    assert t[2] == 1.0
    assert t[3] == pytest.approx(1.0526, abs=1e-4)
    assert t[4] == pytest.approx(1.0714, abs=1e-4)


def test_zero_util_mode_excluded():
    t = predict_t_norm(make_app({1: (0.0, 100), 2: (0.5, 200)}))
    assert t == {2: 1.0}


def test_all_zero_util():
    with pytest.raises(PerfModelError, match="no usable profiling signal"):
        predict_t_norm(make_app({1: (0.0, 100), 2: (0.0, 200)}))


def test_tau_zero_keeps_only_fastest_ties():
    # g*u equal for 2 and 4 GPUs -> both at t_norm 1
    app = make_app({1: (0.9, 100), 2: (0.6, 200), 4: (0.3, 400)})
    est = estimate_modes(app, PolicyConfig(tau=0.0))
    assert {e.gpu_count for e in est if e.within_tolerance} == {2, 4}


def test_tolerance_inclusive():
    # t_norm 1.08 against tau 0.1
    app = make_app({1: (1.0, 100), 2: (1.0 / 2.16, 100)})
    est = {e.gpu_count: e for e in estimate_modes(app, PolicyConfig(tau=0.1))}
    assert est[2].t_norm == pytest.approx(1.08)
    assert est[1].within_tolerance and est[2].within_tolerance


def test_slower_mode_is_energy_best():
    # 3 GPUs fastest at 1287 W, 2 GPUs 8% slower at 946 W
    u3 = 0.5
    u2 = 3 * u3 / (2 * 1.08)
    app = make_app({2: (u2, 946.0), 3: (u3, 1287.0)})
    est = {e.gpu_count: e for e in estimate_modes(app, PolicyConfig())}
    assert est[2].e_proxy == pytest.approx(1021.68, rel=1e-9)
    assert est[3].e_proxy == pytest.approx(1287.0, rel=1e-12)
    assert est[2].e_norm == pytest.approx(1.0)
    assert est[3].e_norm == pytest.approx(1.2597, abs=1e-4)


def test_amortization_examples():
    assert amortization_time(64000, 341) == pytest.approx(187.68, abs=0.01)
    assert amortization_time(64000, 341) / 60 == pytest.approx(3.13, abs=0.01)
    assert amortization_time(34000, 210) == pytest.approx(161.90, abs=0.01)
    assert amortization_time(34000, 210) / 60 == pytest.approx(2.70, abs=0.01)
    assert amortization_time(0, 100) == 0


@pytest.mark.parametrize("delta", [0, -5])
def test_amortization_no_path(delta):
    with pytest.raises(PerfModelError, match="no amortization path"):
        amortization_time(1000, delta)


seeds = st.integers(0, 100_000)


@settings(max_examples=100, deadline=None)
@given(seeds, st.floats(0.0, 0.5))
def test_normalization_and_proxy(seed, tau):
    for app in random_workload(seed).applications:
        est = estimate_modes(app, PolicyConfig(tau=tau))
        assert min(e.t_norm for e in est) == 1.0
        assert min(e.e_norm for e in est) == 1.0
        assert any(e.within_tolerance for e in est)
        for e in est:
            assert e.e_proxy == pytest.approx(app.profile(e.gpu_count).busy_power * e.t_norm, rel=1e-12)
            assert e.within_tolerance == (e.t_norm <= (1 + tau) * (1 + 1e-9))


@settings(max_examples=100, deadline=None)
@given(seeds, st.floats(0.05, 1.0))
def test_util_scale_invariance(seed, factor):
    for app in random_workload(seed).applications:
        scaled = replace(app, profiles=tuple(replace(p, dram_util=p.dram_util * factor) for p in app.profiles))
        a, b = predict_t_norm(app), predict_t_norm(scaled)
        assert a.keys() == b.keys()
        for g in a:
            assert b[g] == pytest.approx(a[g], rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(seeds, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_tau_monotone(seed, t1, t2):
    lo, hi = sorted((t1, t2))
    for app in random_workload(seed).applications:
        a = {e.gpu_count for e in estimate_modes(app, PolicyConfig(tau=lo)) if e.within_tolerance}
        b = {e.gpu_count for e in estimate_modes(app, PolicyConfig(tau=hi)) if e.within_tolerance}
        assert a <= b


@settings(max_examples=100, deadline=None)
@given(seeds, st.floats(0.1, 10.0))
def test_power_scale_keeps_energy_argmin(seed, factor):
    for app in random_workload(seed).applications:
        scaled = replace(app, profiles=tuple(replace(p, busy_power=p.busy_power * factor) for p in app.profiles))
        best = lambda est: min(est, key=lambda e: (e.e_norm, e.gpu_count)).gpu_count
        assert best(estimate_modes(app, PolicyConfig())) == best(estimate_modes(scaled, PolicyConfig()))
