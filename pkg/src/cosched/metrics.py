"""Relative savings between a policy run and a baseline run.

All values are percentages. Negative savings mean the policy did worse and
are reported as-is.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import SimResult


class MetricError(ValueError):
    pass


def _reduction(policy_value: float, base_value: float, what: str) -> float:
    if not base_value > 0:
        raise MetricError(f"baseline {what} must be positive, got {base_value}")
    return 100.0 * (base_value - policy_value) / base_value


def energy_saving(e_policy: float, e_base: float) -> float:
    return _reduction(e_policy, e_base, "energy")


def makespan_improvement(t_policy: float, t_base: float) -> float:
    return _reduction(t_policy, t_base, "makespan")


def edp_saving(edp_policy: float, edp_base: float) -> float:
    return _reduction(edp_policy, edp_base, "EDP")


def composed_edp_saving(energy_pct: float, makespan_pct: float) -> float:
    """EDP saving implied by an energy saving and a makespan saving, since EDP = E * T."""
    return 100.0 * (1.0 - (1.0 - energy_pct / 100.0) * (1.0 - makespan_pct / 100.0))


def perf_loss(runtime_coscheduled: float, runtime_solo_optimal: float) -> float:
    if not runtime_solo_optimal > 0:
        raise MetricError(f"solo runtime must be positive, got {runtime_solo_optimal}")
    return 100.0 * (runtime_coscheduled - runtime_solo_optimal) / runtime_solo_optimal


@dataclass
class ComparisonReport:
    baseline_kind: str
    per_policy: dict[str, dict[str, float]]
    per_app_perf_loss: dict[str, dict[str, float]]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "baseline_kind": self.baseline_kind,
            "per_policy": self.per_policy,
            "per_app_perf_loss": self.per_app_perf_loss,
            "metadata": self.metadata,
        }


def compare(results: dict[str, SimResult], baseline_kind: str, metadata: dict | None = None) -> ComparisonReport:
    base = results[baseline_kind]
    per_policy = {}
    for name, r in results.items():
        per_policy[name] = {
            "energy_saving_pct": energy_saving(r.total_energy_j, base.total_energy_j),
            "makespan_improvement_pct": makespan_improvement(r.makespan_s, base.makespan_s),
            "edp_saving_pct": edp_saving(r.edp, base.edp),
        }
    losses = {name: dict(sorted(r.per_app_perf_loss.items())) for name, r in results.items()}
    return ComparisonReport(baseline_kind, per_policy, losses, dict(metadata or {}))


def format_table(reports: list[ComparisonReport]) -> str:
    """Aligned plain-text table, one row per (baseline, policy)."""
    header = ("baseline", "policy", "energy_saving_%", "makespan_impr_%", "edp_saving_%")
    rows = [header]
    for rep in reports:
        for name, m in rep.per_policy.items():
            rows.append(
                (
                    rep.baseline_kind,
                    name,
                    f"{m['energy_saving_pct']:.2f}",
                    f"{m['makespan_improvement_pct']:.2f}",
                    f"{m['edp_saving_pct']:.2f}",
                )
            )
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for k, r in enumerate(rows):
        cells = [r[0].ljust(widths[0]), r[1].ljust(widths[1])] + [c.rjust(w) for c, w in zip(r[2:], widths[2:])]
        lines.append("  ".join(cells).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
