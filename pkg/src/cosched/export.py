"""Trace, report and Gantt-chart serialization.

Formats (all stable, no timestamps):

trace.csv
    One row per interval: t_start, t_end, running, busy_gpus, idle_gpus,
    active_power_w, idle_power_w. ``running`` is ``app@g0+g1;app2@g2``.
events.json
    ``{"total_gpus", "makespan_s", "events": [{"time", "kind", "app_id",
    "gpu_count", "numa_assignment", "gpus", "event_index"}]}``
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from html import escape
from pathlib import Path

from .engine import ScheduleTrace, SimResult

CSV_FIELDS = ["t_start", "t_end", "running", "busy_gpus", "idle_gpus", "active_power_w", "idle_power_w"]


class TraceFormatError(ValueError):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def trace_csv(trace: ScheduleTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for iv in trace.intervals:
        running = ";".join(f"{a}@{'+'.join(map(str, gpus))}" for a, gpus in iv.running)
        w.writerow([repr(iv.t_start), repr(iv.t_end), running, iv.busy_gpus, iv.idle_gpus,
                    repr(iv.active_power_w), repr(iv.idle_power_w)])
    return buf.getvalue()


def events_dict(trace: ScheduleTrace) -> dict:
    return {
        "total_gpus": trace.total_gpus,
        "makespan_s": trace.makespan,
        "events": [
            {
                "time": e.time,
                "kind": e.kind,
                "app_id": e.app_id,
                "gpu_count": e.gpu_count,
                "numa_assignment": e.numa_domain,
                "gpus": list(e.gpus),
                "event_index": e.event_index,
            }
            for e in trace.events
        ],
    }


def events_json(trace: ScheduleTrace) -> str:
    return _dumps(events_dict(trace))


def result_dict(r: SimResult) -> dict:
    return {
        "policy": r.policy,
        "total_energy_j": r.total_energy_j,
        "active_energy_j": r.active_energy_j,
        "idle_energy_j": r.idle_energy_j,
        "profiling_energy_j": r.profiling_energy_j,
        "profiling_included": r.profiling_included,
        "makespan_s": r.makespan_s,
        "edp_js": r.edp,
        "per_app": {
            a: {
                "gpu_count": rec.gpu_count,
                "gpus": list(rec.gpus),
                "numa_domain": rec.numa_domain,
                "start_s": rec.start_s,
                "end_s": rec.end_s,
                "runtime_s": rec.runtime_s,
                "active_energy_j": rec.active_energy_j,
                "cross_numa": rec.cross_numa,
                "corun": rec.corun,
                "perf_loss_pct": r.per_app_perf_loss[a],
            }
            for a, rec in sorted(r.trace.per_app.items())
        },
        "decisions": [
            {"event_index": i, "launch": [{"app_id": a, "gpu_count": g} for a, g in launch]}
            for i, launch in r.trace.decisions
        ],
    }


def write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# Gantt


@dataclass(frozen=True)
class Bar:
    app_id: str
    gpus: tuple[int, ...]
    start: float
    end: float


def bars_from_events(data: dict) -> tuple[int, list[Bar]]:
    try:
        M = int(data["total_gpus"])
        starts = {}
        bars = []
        for e in data["events"]:
            key = e["app_id"]
            if e["kind"] == "launch":
                starts[key] = (float(e["time"]), tuple(int(g) for g in e["gpus"]))
            elif e["kind"] == "finish":
                t0, gpus = starts.pop(key)
                bars.append(Bar(key, gpus, t0, float(e["time"])))
            else:
                raise TraceFormatError(f"unknown event kind {e['kind']!r}")
    except (KeyError, TypeError, ValueError) as e:
        raise TraceFormatError(f"malformed events trace: {e}") from None
    if starts:
        raise TraceFormatError(f"launch without finish for {sorted(starts)}")
    return M, bars


def bars_from_csv(text: str) -> tuple[int, list[Bar]]:
    rows = list(csv.DictReader(io.StringIO(text)))
    spans: dict[tuple[str, tuple[int, ...]], list[float]] = {}
    M = 0
    try:
        for row in rows:
            t0, t1 = float(row["t_start"]), float(row["t_end"])
            M = max(M, int(row["busy_gpus"]) + int(row["idle_gpus"]))
            for item in filter(None, row["running"].split(";")):
                app, _, gl = item.rpartition("@")
                key = (app, tuple(int(g) for g in gl.split("+")))
                s = spans.setdefault(key, [t0, t1])
                s[0], s[1] = min(s[0], t0), max(s[1], t1)
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise TraceFormatError(f"malformed CSV trace: {e}") from None
    if rows and set(CSV_FIELDS) - set(rows[0]):
        raise TraceFormatError("CSV trace is missing columns")
    bars = [Bar(a, g, s, e) for (a, g), (s, e) in spans.items()]
    bars.sort(key=lambda b: (b.start, b.app_id))
    return M, bars


def load_bars(path: Path) -> tuple[int, list[Bar]]:
    text = Path(path).read_text(encoding="utf-8")
    if Path(path).suffix.lower() == ".csv":
        return bars_from_csv(text)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise TraceFormatError(f"line {e.lineno}: {e.msg}") from None
    return bars_from_events(data)


PALETTE = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
           "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"]


def _tick_step(span: float) -> float:
    if span <= 0:
        return 1.0
    raw = span / 8
    mag = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 5, 10):
        if raw <= m * mag:
            return m * mag
    return 10 * mag


def gantt_svg(total_gpus: int, bars: list[Bar], title: str = "") -> str:
    """Static SVG: one lane per GPU index, one colored bar per app per lane."""
    lane_h, left, top, plot_w = 28, 70, 40, 720
    makespan = max((b.end for b in bars), default=0.0)
    height = top + lane_h * total_gpus + 50
    width = left + plot_w + 150
    scale = plot_w / makespan if makespan > 0 else 0.0
    colors = {}
    for b in sorted(bars, key=lambda b: (b.start, b.app_id)):
        colors.setdefault(b.app_id, PALETTE[len(colors) % len(PALETTE)])

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{left}" y="20" font-size="13">{escape(title)}</text>')
    axis_y = top + lane_h * total_gpus
    for lane in range(total_gpus):
        y = top + lane * lane_h
        out.append(f'<text x="{left - 8}" y="{y + lane_h / 2 + 4:.1f}" text-anchor="end">GPU {lane}</text>')
        out.append(f'<line x1="{left}" y1="{y + lane_h}" x2="{left + plot_w}" y2="{y + lane_h}" stroke="#e0e0e0"/>')
    out.append(f'<line x1="{left}" y1="{axis_y}" x2="{left + plot_w}" y2="{axis_y}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{axis_y}" stroke="black"/>')
    if makespan > 0:
        step = _tick_step(makespan)
        k = 0
        while k * step <= makespan + 1e-9:
            x = left + k * step * scale
            out.append(f'<line x1="{x:.2f}" y1="{axis_y}" x2="{x:.2f}" y2="{axis_y + 4}" stroke="black"/>')
            out.append(f'<text x="{x:.2f}" y="{axis_y + 16}" text-anchor="middle">{k * step:g}</text>')
            k += 1
    out.append(f'<text x="{left + plot_w / 2:.1f}" y="{axis_y + 34}" text-anchor="middle">time (s)</text>')
    for b in bars:
        x = left + b.start * scale
        w = (b.end - b.start) * scale
        for g in b.gpus:
            y = top + g * lane_h + 3
            out.append(
                f'<rect x="{x:.2f}" y="{y}" width="{w:.2f}" height="{lane_h - 6}" '
                f'fill="{colors[b.app_id]}" stroke="black" stroke-width="0.5">'
                f'<title>{escape(b.app_id)} [{b.start:g}, {b.end:g}] s</title></rect>'
            )
            if w > 30:
                out.append(f'<text x="{x + 4:.2f}" y="{y + lane_h / 2 + 1:.1f}" fill="white">{escape(b.app_id)}</text>')
    for i, (app, color) in enumerate(colors.items()):
        y = top + i * 18
        out.append(f'<rect x="{left + plot_w + 20}" y="{y}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{left + plot_w + 38}" y="{y + 10}">{escape(app)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def trace_gantt_svg(trace: ScheduleTrace, title: str = "") -> str:
    _, bars = bars_from_events(events_dict(trace))
    return gantt_svg(trace.total_gpus, bars, title)
