"""SVG Gantt charts of evaluator timelines and DOT text of task graphs."""

from __future__ import annotations

import math
from typing import Optional, Sequence
from xml.sax.saxutils import escape

from ..appgraph import AppGraph, to_dot
from ..evaluator import Timeline

KIND_COLORS = {
    "compute": "#4c72b0",
    "read": "#55a868",
    "write": "#dd8452",
    "transfer": "#8172b3",
}

LANE_H = 28
LABEL_W = 110
PLOT_W = 760
PAD = 10


def _fmt(t: float) -> str:
    return f"{t:.4g}"


def render_gantt(timeline: Timeline, units: Optional[Sequence[str]] = None,
                 title: str = "") -> str:
    """One lane per unit, events as bars colored by kind.

    ``units`` fixes the lane order; by default lanes follow the timeline's
    clock order, then any unit that only appears in events.
    """
    lanes = list(units) if units is not None else list(timeline.clocks)
    for e in timeline.events:
        if e.unit not in lanes:
            lanes.append(e.unit)
    span = max((e.end for e in timeline.events if math.isfinite(e.end)), default=0.0)
    scale = PLOT_W / span if span > 0 else 1.0
    top = PAD + (20 if title else 0)
    height = top + LANE_H * len(lanes) + 40
    width = LABEL_W + PLOT_W + 2 * PAD
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">']
    if title:
        out.append(f'<text x="{PAD}" y="{PAD + 12}" font-size="13">{escape(title)}</text>')
    row = {u: k for k, u in enumerate(lanes)}
    for u, k in row.items():
        y = top + k * LANE_H
        fill = "#f4f4f4" if k % 2 == 0 else "#ffffff"
        out.append(f'<rect class="lane" x="{LABEL_W}" y="{y}" width="{PLOT_W}" '
                   f'height="{LANE_H}" fill="{fill}"/>')
        out.append(f'<text x="{PAD}" y="{y + LANE_H / 2 + 4}">{escape(u)}</text>')
    for e in timeline.events:
        if not (math.isfinite(e.start) and math.isfinite(e.end)):
            continue
        y = top + row[e.unit] * LANE_H + 4
        x = LABEL_W + e.start * scale
        w = max((e.end - e.start) * scale, 0.5)
        tip = f"node {e.node} {e.kind} {_fmt(e.start)}-{_fmt(e.end)} s"
        if e.peer:
            tip += f" with {e.peer}"
        out.append(f'<rect class="event {e.kind}" x="{x:.2f}" y="{y}" width="{w:.2f}" '
                   f'height="{LANE_H - 8}" fill="{KIND_COLORS.get(e.kind, "#999999")}">'
                   f'<title>{escape(tip)}</title></rect>')
        if w > 18:
            out.append(f'<text x="{x + 2:.2f}" y="{y + LANE_H / 2}" fill="#ffffff">{e.node}</text>')
    axis_y = top + LANE_H * len(lanes) + 14
    out.append(f'<line x1="{LABEL_W}" y1="{axis_y - 10}" x2="{LABEL_W + PLOT_W}" '
               f'y2="{axis_y - 10}" stroke="#333333"/>')
    out.append(f'<text x="{LABEL_W}" y="{axis_y + 4}">0 s</text>')
    out.append(f'<text x="{LABEL_W + PLOT_W - 60}" y="{axis_y + 4}">{_fmt(span)} s</text>')
    lx = LABEL_W
    for kind, color in KIND_COLORS.items():
        out.append(f'<rect x="{lx + 90}" y="{axis_y + 10}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{lx + 104}" y="{axis_y + 19}">{kind}</text>')
        lx += 90
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_dot(graph: AppGraph, mapping: Optional[dict[int, str]] = None) -> str:
    return to_dot(graph, mapping)
