"""Command-line front end.

Exit codes: 0 success, 1 bad input (parse/validation/trace format),
2 engine fault (infeasible action, unreplayable plan).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import export
from .engine import EngineFault, SimResult, simulate
from .fixtures import FIXTURES, load_fixture, random_workload
from .metrics import compare, format_table
from .model import DEFAULT_LAMBDA, DEFAULT_TAU, POLICY_KINDS, PolicyConfig, WorkloadError, dump_workload, load_workload
from .oracle import ReplayError, load_plan, replay, save_plan, solve
from .perfmodel import PerfModelError, estimate_modes
from .policy import BASELINE_KINDS

log = logging.getLogger("cosched")

EMIT_CHOICES = ("trace_csv", "events_json", "gantt_svg", "report_json", "report_table")
MARBLE_NOTE = "marble_like approximates Marble: fastest GPU count per job, greedy GPU-maximizing packing"


class UsageError(Exception):
    pass


def _load(arg: str):
    if arg.startswith("fixture:"):
        name = arg.split(":", 1)[1]
        if name not in FIXTURES:
            raise WorkloadError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
        return load_fixture(name)
    return load_workload(arg)


def _emit_set(value: str | None, default: tuple[str, ...]) -> set[str]:
    if value is None:
        return set(default)
    items = {v.strip() for v in value.split(",") if v.strip()}
    bad = items - set(EMIT_CHOICES)
    if bad:
        raise UsageError(f"unknown --emit item(s) {', '.join(sorted(bad))}; choose from {', '.join(EMIT_CHOICES)}")
    if not items:
        raise UsageError("--emit must name at least one artifact")
    return items


def _summary(r: SimResult) -> str:
    return (
        f"{r.policy}: energy={r.total_energy_j:.1f} J (active {r.active_energy_j:.1f}, idle {r.idle_energy_j:.1f}) "
        f"makespan={r.makespan_s:.2f} s EDP={r.edp:.6g} J*s"
    )


def _report(r: SimResult, spec, cfg: PolicyConfig | None) -> dict:
    d = {"workload": spec.platform.name}
    if cfg is not None:
        d["config"] = {"policy": cfg.kind, "lambda": cfg.lam, "tau": cfg.tau}
    d.update(export.result_dict(r))
    if r.policy == "ecosched" and cfg is not None:
        d["mode_estimates"] = {
            a.app_id: [
                {"gpu_count": e.gpu_count, "t_norm": e.t_norm, "e_proxy": e.e_proxy,
                 "e_norm": e.e_norm, "within_tolerance": e.within_tolerance}
                for e in estimate_modes(a, cfg)
            ]
            for a in spec.applications
        }
    if r.policy == "marble_like":
        d["note"] = MARBLE_NOTE
    return d


def _write_run(out: Path, r: SimResult, report: dict, emit: set[str], stem: str = "") -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        p = out / f"{stem}{name}"
        export.write_text(p, text)
        written.append(p)

    if "trace_csv" in emit:
        put("trace.csv", export.trace_csv(r.trace))
    if "events_json" in emit:
        put("events.json", export.events_json(r.trace))
    if "gantt_svg" in emit:
        put("gantt.svg", export.trace_gantt_svg(r.trace, f"{r.policy}: makespan {r.makespan_s:g} s"))
    if "report_json" in emit:
        put("report.json", json.dumps(report, indent=2) + "\n")
    if "report_table" in emit:
        rows = [f"{k:<18} {v:.6g}" for k, v in (
            ("total_energy_j", r.total_energy_j), ("active_energy_j", r.active_energy_j),
            ("idle_energy_j", r.idle_energy_j), ("makespan_s", r.makespan_s), ("edp_js", r.edp))]
        apps = [f"{a:<18} {rec.gpu_count} GPU(s)  {rec.start_s:10.2f} -> {rec.end_s:10.2f}  "
                f"loss {r.per_app_perf_loss[a]:6.2f}%" for a, rec in sorted(r.trace.per_app.items())]
        put("report.txt", "\n".join([f"policy {r.policy}"] + rows + apps) + "\n")
    return written


def cmd_validate(args) -> int:
    spec = _load(args.workload)
    print(f"ok: {len(spec.applications)} application(s), M={spec.platform.total_gpus}, K={spec.platform.numa_domains}")
    return 0


def cmd_simulate(args) -> int:
    spec = _load(args.workload)
    emit = _emit_set(args.emit, ("trace_csv", "events_json", "report_json"))
    if args.policy == "oracle_replay":
        if not args.plan:
            raise UsageError("--policy oracle_replay needs --plan")
        r = replay(load_plan(args.plan), spec, args.include_profiling_energy)
        cfg = None
    else:
        cfg = PolicyConfig(kind=args.policy, lam=args.lam, tau=args.tau)
        r = simulate(spec, cfg, include_profiling_energy=args.include_profiling_energy)
    _write_run(Path(args.out), r, _report(r, spec, cfg), emit)
    print(_summary(r))
    return 0


def run_all(spec, lam: float, tau: float, with_oracle: bool, time_budget: float | None, include_profiling=False):
    results: dict[str, SimResult] = {}
    for kind in ("ecosched",) + BASELINE_KINDS:
        results[kind] = simulate(spec, PolicyConfig(kind=kind, lam=lam, tau=tau), include_profiling_energy=include_profiling)
    oracle_meta = None
    if with_oracle:
        plan = solve(spec, time_budget_s=time_budget)
        results["oracle"] = replay(plan, spec)
        oracle_meta = {"complete": plan.complete, "nodes_explored": plan.nodes_explored}
    return results, oracle_meta


def cmd_compare(args) -> int:
    spec = _load(args.workload)
    emit = _emit_set(args.emit, ("report_json", "report_table"))
    with_oracle = args.oracle and len(spec.applications) <= args.oracle_max_apps
    results, oracle_meta = run_all(spec, args.lam, args.tau, with_oracle, args.oracle_time_budget,
                                   args.include_profiling_energy)
    meta = {"workload": spec.platform.name, "lambda": args.lam, "tau": args.tau, "marble_like": MARBLE_NOTE}
    if oracle_meta is not None:
        meta["oracle"] = oracle_meta
        if not oracle_meta["complete"]:
            log.warning("oracle search hit its budget; best plan found is reported")
    reports = [compare(results, base, meta) for base in ("sequential_optimal_gpu", "sequential_max_gpu")]
    out = Path(args.out)
    res_dir = out / "results"
    res_dir.mkdir(parents=True, exist_ok=True)
    for name, r in results.items():
        export.write_text(res_dir / f"{name}.json", json.dumps(export.result_dict(r), indent=2) + "\n")
        if "trace_csv" in emit:
            export.write_text(res_dir / f"{name}.trace.csv", export.trace_csv(r.trace))
        if "events_json" in emit:
            export.write_text(res_dir / f"{name}.events.json", export.events_json(r.trace))
        if "gantt_svg" in emit:
            export.write_text(res_dir / f"{name}.gantt.svg", export.trace_gantt_svg(r.trace, name))
    table = format_table(reports)
    if "report_json" in emit:
        export.write_text(out / "compare.json", json.dumps([rep.to_dict() for rep in reports], indent=2) + "\n")
    if "report_table" in emit:
        export.write_text(out / "compare.txt", table)
    sys.stdout.write(table)
    return 0


def cmd_oracle(args) -> int:
    spec = _load(args.workload)
    plan = solve(spec, max_nodes=args.max_nodes, time_budget_s=args.oracle_time_budget)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_plan(plan, out / "plan.json")
    flag = "" if plan.complete else " (incomplete: budget exhausted)"
    print(f"oracle: energy={plan.objective_energy_j:.1f} J makespan={plan.objective_makespan_s:.2f} s "
          f"nodes={plan.nodes_explored}{flag}")
    return 0


def cmd_replay(args) -> int:
    spec = _load(args.workload)
    emit = _emit_set(args.emit, ("trace_csv", "events_json", "report_json"))
    r = replay(load_plan(args.plan), spec, args.include_profiling_energy)
    _write_run(Path(args.out), r, _report(r, spec, None), emit)
    print(_summary(r))
    return 0


def cmd_gantt(args) -> int:
    total, bars = export.load_bars(Path(args.trace))
    out = Path(args.out) if args.out else Path(args.trace).with_suffix(".svg")
    export.write_text(out, export.gantt_svg(total, bars, args.title or ""))
    print(f"wrote {out}")
    return 0


def cmd_generate(args) -> int:
    spec = random_workload(args.seed, n_apps=args.apps, total_gpus=args.gpus, numa_domains=args.numa,
                           max_modes=args.max_modes, slowdowns=args.slowdowns)
    text = dump_workload(spec)
    if args.out:
        export.write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def _policy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA, help="idle-penalty weight (default 1.0)")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="slowdown tolerance (default 0.10)")
    p.add_argument("--include-profiling-energy", action="store_true",
                   help="add profiling energy to the ecosched total")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cosched", description="Energy-aware GPU co-scheduling simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    wl_help = "workload JSON file, or fixture:NAME (" + ", ".join(FIXTURES) + ")"

    p = sub.add_parser("validate", help="check a workload file")
    p.add_argument("--workload", required=True, help=wl_help)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="run one policy")
    p.add_argument("--workload", required=True, help=wl_help)
    p.add_argument("--policy", choices=POLICY_KINDS, default="ecosched")
    p.add_argument("--plan", help="oracle plan JSON (for --policy oracle_replay)")
    p.add_argument("--out", default="out")
    p.add_argument("--emit", help="comma list of " + ",".join(EMIT_CHOICES))
    _policy_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run every policy and compare against both sequential baselines")
    p.add_argument("--workload", required=True, help=wl_help)
    p.add_argument("--out", default="out")
    p.add_argument("--emit", help="comma list of " + ",".join(EMIT_CHOICES))
    p.add_argument("--no-oracle", dest="oracle", action="store_false")
    p.add_argument("--oracle-max-apps", type=int, default=7)
    p.add_argument("--oracle-time-budget", type=float, default=60.0, metavar="SECONDS")
    _policy_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="solve for the energy-minimal plan")
    p.add_argument("--workload", required=True, help=wl_help)
    p.add_argument("--out", default="out")
    p.add_argument("--oracle-time-budget", type=float, default=None, metavar="SECONDS")
    p.add_argument("--max-nodes", type=int, default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("replay", help="replay a plan through the simulator")
    p.add_argument("--workload", required=True, help=wl_help)
    p.add_argument("--plan", required=True)
    p.add_argument("--out", default="out")
    p.add_argument("--emit", help="comma list of " + ",".join(EMIT_CHOICES))
    p.add_argument("--include-profiling-energy", action="store_true")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("gantt", help="render a trace (events JSON or trace CSV) as SVG")
    p.add_argument("--trace", required=True)
    p.add_argument("--out")
    p.add_argument("--title")
    p.set_defaults(func=cmd_gantt)

    p = sub.add_parser("generate", help="write a random workload")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--apps", type=int)
    p.add_argument("--gpus", type=int)
    p.add_argument("--numa", type=int)
    p.add_argument("--max-modes", type=int, default=3)
    p.add_argument("--slowdowns", action="store_true", help="draw non-trivial co-run/cross-NUMA slowdowns")
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (WorkloadError, export.TraceFormatError, PerfModelError, UsageError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (EngineFault, ReplayError) as e:
        print(f"engine fault: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
