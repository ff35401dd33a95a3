"""Bundled workloads and a seeded random workload generator."""

from __future__ import annotations

import random
from importlib import resources

from ..model import Application, ModeProfile, Platform, WorkloadSpec, load_workload

FIXTURES = {
    "case_study": "case_study.json",
    "compute_bound": "compute_bound.json",
}


def fixture_path(name: str):
    return resources.files(__name__).joinpath(FIXTURES[name])


def load_fixture(name: str) -> WorkloadSpec:
    with resources.as_file(fixture_path(name)) as p:
        return load_workload(p)


def random_workload(
    seed: int,
    n_apps: int | None = None,
    total_gpus: int | None = None,
    numa_domains: int | None = None,
    max_modes: int = 3,
    slowdowns: bool = False,
) -> WorkloadSpec:
    """Small random instance with sublinear strong scaling and noisy profiles.

    Runtimes and powers are drawn on a coarse grid so that distinct schedules
    rarely tie by accident.
    """
    rng = random.Random(seed)
    M = total_gpus if total_gpus is not None else rng.randint(1, 4)
    K = numa_domains if numa_domains is not None else rng.randint(1, min(2, M))
    n = n_apps if n_apps is not None else rng.randint(1, 4)
    apps = []
    for i in range(n):
        aid = f"app{i}"
        k = rng.randint(1, min(max_modes, M))
        counts = sorted(rng.sample(range(1, M + 1), k))
        t1 = rng.randint(20, 200)
        alpha = rng.uniform(0.2, 1.0)
        per_gpu = rng.randint(150, 400)
        profiles = []
        for g in counts:
            t = round(t1 / g**alpha * rng.uniform(0.9, 1.1), 1)
            p = round(per_gpu * g * rng.uniform(0.85, 1.15), 1)
            # utilization tracks throughput with some measurement noise
            util = min(1.0, round(t1 / (g * t) * rng.uniform(0.45, 0.55), 4))
            profiles.append(ModeProfile(aid, g, t, p, max(util, 0.01), round(rng.uniform(0, 5000), 1), 10.0))
        corun = rng.choice([1.0, 1.0, 1.05, 1.1]) if slowdowns else 1.0
        cross = rng.choice([1.0, 1.05]) if slowdowns else 1.0
        apps.append(Application(aid, frozenset(counts), tuple(profiles), corun, cross))
    platform = Platform(M, K, float(rng.choice([0, 30, 50, 70])), f"random-{seed}")
    return WorkloadSpec(platform, tuple(apps), n)
