"""Goal criteria, heuristics and per-object heuristic gradients for the four tasks.

Only the goal-region sorting heuristic is the squared-distance sum used in
the literature; the grasping, relocating and free-sorting heuristics are
reconstructions (monotone toward their goal criteria) kept behind
:class:`TaskSpec` so they can be swapped without touching the planner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Optional, Tuple

import numpy as np

from .arm import ArmSpec, ik
from .geometry import Pose2, Rect

if TYPE_CHECKING:
    from .world import SystemState

KINDS = ("grasping", "relocating", "sorting_free", "sorting_regions")
FD_STEP = 1e-5


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    target_object: Optional[int] = None
    relocate_region: Optional[Rect] = None
    goal_regions: Optional[Tuple[Rect, ...]] = None
    clutter_radius: Optional[float] = None
    cluster_d_in: Optional[float] = None
    separation_d_out: Optional[float] = None
    progress_threshold: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        need = {
            "grasping": ("target_object", "clutter_radius"),
            "relocating": ("target_object", "relocate_region"),
            "sorting_free": ("cluster_d_in", "separation_d_out"),
            "sorting_regions": ("goal_regions",),
        }[self.kind]
        missing = [n for n in need if getattr(self, n) is None]
        if missing:
            raise ValueError(f"{self.kind} task requires {', '.join(missing)}")
        if self.goal_regions is not None:
            object.__setattr__(self, "goal_regions", tuple(self.goal_regions))

    def regions(self) -> Tuple[Rect, ...]:
        """Rectangles the task constrains, for validation and rendering."""
        if self.kind == "sorting_regions":
            return self.goal_regions
        if self.kind == "relocating":
            return (self.relocate_region,)
        return ()


def _xy(q: "SystemState"):
    return [(o.pose.x, o.pose.y) for o in q.objects]


def _classes(q: "SystemState"):
    out = {}
    for j, o in enumerate(q.objects):
        out.setdefault(o.class_id, []).append(j)
    return [out[k] for k in sorted(out)]


def pregrasp_pose(q: "SystemState", t: TaskSpec, arm: ArmSpec) -> Pose2:
    """End-effector on the target centroid, pointing away from the arm base."""
    o = q.objects[t.target_object].pose
    b = arm.base_pose
    return Pose2(o.x, o.y, math.atan2(o.y - b.y, o.x - b.x))


def goal(q: "SystemState", t: TaskSpec, arm: Optional[ArmSpec] = None) -> int:
    xy = _xy(q)
    if t.kind == "sorting_regions":
        for (x, y), o in zip(xy, q.objects):
            if not t.goal_regions[o.class_id].contains(x, y):
                return 0
        return 1
    if t.kind == "relocating":
        return int(t.relocate_region.contains(*xy[t.target_object]))
    if t.kind == "grasping":
        tx, ty = xy[t.target_object]
        R = t.clutter_radius
        for j, (x, y) in enumerate(xy):
            if j != t.target_object and math.hypot(x - tx, y - ty) < R:
                return 0
        arm = arm or ArmSpec()
        return int(ik(pregrasp_pose(q, t, arm), arm, q.arm) is not None)
    # sorting_free
    cents = []
    for members in _classes(q):
        pts = [xy[j] for j in members]
        for a in range(len(pts)):
            for b in range(a + 1, len(pts)):
                if math.dist(pts[a], pts[b]) > t.cluster_d_in:
                    return 0
        cents.append((sum(p[0] for p in pts) / len(pts), sum(p[1] for p in pts) / len(pts)))
    for a in range(len(cents)):
        for b in range(a + 1, len(cents)):
            if math.dist(cents[a], cents[b]) < t.separation_d_out:
                return 0
    return 1


def _heuristic_xy(xy, classes_of, t: TaskSpec) -> float:
    if t.kind == "sorting_regions":
        h = 0.0
        for (x, y), c in zip(xy, classes_of):
            gx, gy = t.goal_regions[c].center
            h += (x - gx) ** 2 + (y - gy) ** 2
        return h
    if t.kind == "relocating":
        x, y = xy[t.target_object]
        gx, gy = t.relocate_region.center
        return (x - gx) ** 2 + (y - gy) ** 2
    if t.kind == "grasping":
        tx, ty = xy[t.target_object]
        R = t.clutter_radius
        h = 0.0
        for j, (x, y) in enumerate(xy):
            if j == t.target_object:
                continue
            d = math.hypot(x - tx, y - ty)
            if d < R:
                h += (R - d) ** 2
        return h
    groups = {}
    for j, c in enumerate(classes_of):
        groups.setdefault(c, []).append(xy[j])
    h = 0.0
    cents = []
    for c in sorted(groups):
        pts = groups[c]
        for a in range(len(pts)):
            for b in range(a + 1, len(pts)):
                h += (pts[a][0] - pts[b][0]) ** 2 + (pts[a][1] - pts[b][1]) ** 2
        cents.append((sum(p[0] for p in pts) / len(pts), sum(p[1] for p in pts) / len(pts)))
    d_out = t.separation_d_out
    for a in range(len(cents)):
        for b in range(a + 1, len(cents)):
            gap = d_out - math.dist(cents[a], cents[b])
            if gap > 0:
                h += gap * gap
    return h


def heuristic(q: "SystemState", t: TaskSpec) -> float:
    return _heuristic_xy(_xy(q), [o.class_id for o in q.objects], t)


def heuristic_gradients(q: "SystemState", t: TaskSpec) -> np.ndarray:
    """Analytic ``dh/d(x_i, y_i)`` for every object, shape ``(N, 2)``."""
    xy = np.array(_xy(q), dtype=float).reshape(-1, 2)
    g = np.zeros_like(xy)
    cls = [o.class_id for o in q.objects]
    if t.kind == "sorting_regions":
        centers = np.array([t.goal_regions[c].center for c in cls]).reshape(-1, 2)
        return 2.0 * (xy - centers)
    if t.kind == "relocating":
        i = t.target_object
        g[i] = 2.0 * (xy[i] - np.array(t.relocate_region.center))
        return g
    if t.kind == "grasping":
        i = t.target_object
        R = t.clutter_radius
        for j in range(len(xy)):
            if j == i:
                continue
            diff = xy[j] - xy[i]
            d = float(np.hypot(*diff))
            if 0.0 < d < R:
                gj = -2.0 * (R - d) * diff / d
                g[j] += gj
                g[i] -= gj
        return g
    groups = {}
    for j, c in enumerate(cls):
        groups.setdefault(c, []).append(j)
    keys = sorted(groups)
    cents = []
    for c in keys:
        members = groups[c]
        pts = xy[members]
        for a, j in enumerate(members):
            g[j] += 2.0 * (len(members) * pts[a] - pts.sum(axis=0))
        cents.append(pts.mean(axis=0))
    d_out = t.separation_d_out
    for a in range(len(keys)):
        for b in range(a + 1, len(keys)):
            diff = cents[a] - cents[b]
            D = float(np.hypot(*diff))
            gap = d_out - D
            if gap > 0 and D > 0:
                gc = -2.0 * gap * diff / D
                for j in groups[keys[a]]:
                    g[j] += gc / len(groups[keys[a]])
                for j in groups[keys[b]]:
                    g[j] -= gc / len(groups[keys[b]])
    return g


def numeric_gradient(q: "SystemState", t: TaskSpec, i: int, step: float = FD_STEP) -> Tuple[float, float]:
    """Central finite differences of the heuristic in object ``i``'s position."""
    xy = _xy(q)
    cls = [o.class_id for o in q.objects]
    out = []
    for axis in (0, 1):
        plus = list(xy)
        minus = list(xy)
        p = list(xy[i])
        p[axis] += step
        plus[i] = tuple(p)
        p[axis] -= 2 * step
        minus[i] = tuple(p)
        out.append((_heuristic_xy(plus, cls, t) - _heuristic_xy(minus, cls, t)) / (2 * step))
    return out[0], out[1]


def heuristic_gradient(q: "SystemState", t: TaskSpec, i: int, method: str = "analytic") -> Tuple[float, float]:
    if method == "numeric":
        return numeric_gradient(q, t, i)
    g = heuristic_gradients(q, t)[i]
    return float(g[0]), float(g[1])


def gradient_magnitudes(q: "SystemState", t: TaskSpec) -> np.ndarray:
    return np.hypot(*heuristic_gradients(q, t).T)


def progress_threshold(q: "SystemState", t: TaskSpec, fraction: float = 0.1) -> float:
    """Fixed threshold when the task sets one, else a fraction of ``h(q)``."""
    if t.progress_threshold is not None:
        return t.progress_threshold
    return fraction * heuristic(q, t)


def sample_goal_positions(
    q: "SystemState", t: TaskSpec, workspace: Rect, rng: np.random.Generator
) -> List[Tuple[float, float]]:
    """Object positions for goal-biased random states.

    Objects the task does not constrain are drawn uniformly in the workspace.
    """
    n = len(q.objects)
    uni = [(float(rng.uniform(workspace.xmin, workspace.xmax)), float(rng.uniform(workspace.ymin, workspace.ymax))) for _ in range(n)]
    if t.kind == "sorting_regions":
        out = []
        for o in q.objects:
            r = t.goal_regions[o.class_id]
            out.append((float(rng.uniform(r.xmin, r.xmax)), float(rng.uniform(r.ymin, r.ymax))))
        return out
    if t.kind == "relocating":
        r = t.relocate_region
        uni[t.target_object] = (float(rng.uniform(r.xmin, r.xmax)), float(rng.uniform(r.ymin, r.ymax)))
        return uni
    if t.kind == "grasping":
        i = t.target_object
        tx, ty = q.objects[i].pose.x, q.objects[i].pose.y
        R = t.clutter_radius
        out = []
        for j, o in enumerate(q.objects):
            if j == i:
                out.append((tx, ty))
                continue
            ang = math.atan2(o.pose.y - ty, o.pose.x - tx) + rng.uniform(-0.5, 0.5)
            d = R * (1.0 + rng.uniform(0.0, 0.5))
            out.append(workspace.clamp(tx + d * math.cos(ang), ty + d * math.sin(ang)))
        return out
    # sorting_free: a random center per class, members packed around it
    cls = sorted({o.class_id for o in q.objects})
    centers = {c: (float(rng.uniform(workspace.xmin, workspace.xmax)), float(rng.uniform(workspace.ymin, workspace.ymax))) for c in cls}
    out = []
    for o in q.objects:
        cx, cy = centers[o.class_id]
        rad = 0.5 * t.cluster_d_in * math.sqrt(rng.uniform())
        ang = rng.uniform(-math.pi, math.pi)
        out.append(workspace.clamp(cx + rad * math.cos(ang), cy + rad * math.sin(ang)))
    return out


def gradient_check(q: "SystemState", t: TaskSpec) -> float:
    """Max abs difference between analytic and numeric gradients."""
    a = heuristic_gradients(q, t)
    worst = 0.0
    for i in range(len(q.objects)):
        n = numeric_gradient(q, t, i)
        worst = max(worst, abs(a[i, 0] - n[0]), abs(a[i, 1] - n[1]))
    return worst
