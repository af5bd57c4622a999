"""Static SVG rendering of scenes and executed trajectories."""

from __future__ import annotations

import math
from pathlib import Path
from typing import List, Optional, Sequence, Union

from .arm import ee_core, fk, joint_positions
from .geometry import Disc, Pose2, world_core
from .world import Scenario, SystemState

SCALE = 500.0  # pixels per meter
PAD = 20.0
PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _f(v: float) -> str:
    return f"{v:.2f}"


class _Canvas:
    def __init__(self, s: Scenario):
        ws = s.workspace
        xs = [ws.xmin, ws.xmax]
        ys = [ws.ymin, ws.ymax]
        self.x0 = min(xs) - 0.05
        self.y1 = max(ys) + 0.05
        self.w = (max(xs) - min(xs) + 0.1) * SCALE + 2 * PAD
        self.h = (max(ys) - min(ys) + 0.1) * SCALE + 2 * PAD
        self.items: List[str] = []

    def xy(self, x, y):
        return PAD + (x - self.x0) * SCALE, PAD + (self.y1 - y) * SCALE

    def rect(self, r, cls, fill="none", stroke="#000", dash=None):
        x, y = self.xy(r.xmin, r.ymax)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(
            f'<rect class="{cls}" x="{_f(x)}" y="{_f(y)}" width="{_f(r.width * SCALE)}" '
            f'height="{_f(r.height * SCALE)}" fill="{fill}" stroke="{stroke}"{extra}/>'
        )

    def circle(self, x, y, r, cls, fill, stroke="#000"):
        cx, cy = self.xy(x, y)
        self.items.append(
            f'<circle class="{cls}" cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(r * SCALE)}" fill="{fill}" stroke="{stroke}"/>'
        )

    def polygon(self, pts, cls, fill, stroke="#000"):
        s = " ".join("%s,%s" % tuple(map(_f, self.xy(*p))) for p in pts)
        self.items.append(f'<polygon class="{cls}" points="{s}" fill="{fill}" stroke="{stroke}"/>')

    def polyline(self, pts, cls, stroke, width=2.0, dash=None):
        s = " ".join("%s,%s" % tuple(map(_f, self.xy(*p))) for p in pts)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(
            f'<polyline class="{cls}" points="{s}" fill="none" stroke="{stroke}" '
            f'stroke-width="{_f(width)}" stroke-linecap="round"{extra}/>'
        )

    def svg(self) -> str:
        head = (
            '<svg xmlns="http://www.w3.org/2000/svg" '
            f'width="{_f(self.w)}" height="{_f(self.h)}" viewBox="0 0 {_f(self.w)} {_f(self.h)}">'
        )
        return "\n".join([head] + self.items + ["</svg>"]) + "\n"


def _shape(c: _Canvas, shape, pose: Pose2, cls, fill):
    if isinstance(shape, Disc):
        c.circle(pose.x, pose.y, shape.radius, cls, fill)
    else:
        core, _ = world_core(shape, pose)
        c.polygon(core, cls, fill)


def _arm(c: _Canvas, config, s: Scenario):
    spec = s.params.arm
    pts = joint_positions(config, spec)
    c.polyline(pts, "arm", "#555", width=spec.link_width * SCALE)
    core, r = ee_core(config, spec)
    if len(core) == 1:
        c.circle(core[0][0], core[0][1], r, "ee", "#333")
    else:
        c.polyline(core, "ee", "#333", width=2 * r * SCALE)


def render_svg(
    s: Scenario,
    state: Optional[SystemState] = None,
    trajectory=None,
) -> str:
    """SVG text: workspace, obstacles, goal regions, objects, arm, traces.

    With neither ``state`` nor ``trajectory`` only the static scene is drawn.
    ``trajectory`` is a list of executed segments; pushes are solid strokes
    and transits dashed.
    """
    c = _Canvas(s)
    _static(c, s)
    if trajectory:
        for seg in trajectory:
            if not seg.transit.is_trivial:
                pts = [fk(w, s.params.arm) for w in _densify(seg.transit.waypoints)]
                c.polyline([(p.x, p.y) for p in pts], "transit", "#999", width=1.5, dash="4,4")
            ee = [fk(seg.start.arm, s.params.arm)]
            for st in seg.steps:
                ee.append(fk(st.swept.arm, s.params.arm))
            if len(ee) > 1:
                c.polyline([(p.x, p.y) for p in ee], "push", "#000", width=2.0)
        if state is None:
            state = trajectory[-1].observed
    if state is not None:
        _dynamic(c, s, state)
    return c.svg()


def _static(c: _Canvas, s: Scenario):
    c.rect(s.workspace, "workspace", fill="#fafafa")
    for o in s.static_obstacles:
        _shape(c, o.shape, o.pose, "obstacle", "#444")
    regions = s.goal_regions or s.task.regions()
    for k, r in enumerate(regions):
        col = PALETTE[k % len(PALETTE)] if s.task.kind == "sorting_regions" else "#888"
        c.rect(r, "goal-region", stroke=col, dash="6,3")


def _dynamic(c: _Canvas, s: Scenario, state: SystemState):
    for o in state.objects:
        _shape(c, s.shapes[o.shape_id], o.pose, "object", PALETTE[o.class_id % len(PALETTE)])
    _arm(c, state.arm, s)


def _densify(waypoints, step=0.1):
    out = [waypoints[0]]
    for a, b in zip(waypoints, waypoints[1:]):
        n = max(1, int(math.ceil(max(abs(b[k] - a[k]) for k in range(3)) / step)))
        for i in range(1, n + 1):
            t = i / n
            out.append(tuple(a[k] + t * (b[k] - a[k]) for k in range(3)))
    return out


def render_records(s: Scenario, records: Sequence[dict]) -> str:
    """SVG of an exported trajectory (the line records of a ``plan`` run)."""
    from .scenario_io import state_from_dict

    c = _Canvas(s)
    _static(c, s)
    arm = s.params.arm
    state = s.initial_state
    ee = [fk(state.arm, arm)]
    cur_seg = None
    for rec in records:
        if rec["kind"] == "transit":
            if len(ee) > 1:
                c.polyline([(p.x, p.y) for p in ee], "push", "#000", width=2.0)
            pts = [fk(w, arm) for w in _densify([tuple(w) for w in rec["waypoints"]])]
            c.polyline([(p.x, p.y) for p in pts], "transit", "#999", width=1.5, dash="4,4")
            ee = [pts[-1]]
        elif rec["kind"] == "push":
            if cur_seg is not None and rec["segment"] != cur_seg and len(ee) > 1:
                c.polyline([(p.x, p.y) for p in ee], "push", "#000", width=2.0)
                ee = ee[-1:]
            state = state_from_dict(rec["observed"])
            ee.append(fk(state.arm, arm))
        else:
            raise ValueError(f"unknown trajectory record kind {rec['kind']!r}")
        cur_seg = rec["segment"]
    if len(ee) > 1:
        c.polyline([(p.x, p.y) for p in ee], "push", "#000", width=2.0)
    _dynamic(c, s, state)
    return c.svg()


def render_scene(
    s: Scenario,
    out: Union[str, Path],
    state: Optional[SystemState] = None,
    trajectory=None,
) -> Path:
    path = Path(out)
    path.write_text(render_svg(s, state, trajectory))
    return path
