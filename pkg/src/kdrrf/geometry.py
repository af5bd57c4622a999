"""Planar geometry: poses, convex shapes, collision and penetration queries.

Every shape is reduced to a *core* (a point, a segment or a convex polygon,
given in world coordinates) inflated by a radius.  Discs are a point core,
arm links are segment cores (capsules) and polygons have radius zero.  All
queries operate on cores, which keeps the disc/capsule/polygon combinations
on one exact code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

TWO_PI = 2.0 * math.pi

Point = Tuple[float, float]
Core = Tuple[Point, ...]


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.remainder(a, TWO_PI)
    if w <= -math.pi:
        w += TWO_PI
    return w


@dataclass(frozen=True, slots=True)
class Pose2:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        t = self.theta
        if not (-math.pi < t <= math.pi):
            object.__setattr__(self, "theta", wrap_angle(t))

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.x, self.y, self.theta)


@dataclass(frozen=True, slots=True)
class Disc:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disc radius must be positive, got {self.radius}")

    @property
    def bounding_radius(self) -> float:
        return self.radius


@dataclass(frozen=True, slots=True)
class Polygon:
    """Strictly convex polygon, vertices counter-clockwise in the local frame."""

    vertices: Tuple[Point, ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        n = len(verts)
        if n < 3:
            raise ValueError("polygon needs at least 3 vertices")
        for i in range(n):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % n]
            cx, cy = verts[(i + 2) % n]
            if (bx - ax) * (cy - by) - (by - ay) * (cx - bx) <= 0.0:
                raise ValueError("polygon must be strictly convex and counter-clockwise")

    @property
    def bounding_radius(self) -> float:
        return max(math.hypot(x, y) for x, y in self.vertices)

    @classmethod
    def box(cls, width: float, height: float) -> "Polygon":
        hw, hh = 0.5 * width, 0.5 * height
        return cls(((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)))


Shape = Union[Disc, Polygon]


def world_core(shape: Shape, pose: Pose2) -> Tuple[Core, float]:
    """Return ``(core points in world frame, inflation radius)``."""
    if isinstance(shape, Disc):
        return ((pose.x, pose.y),), shape.radius
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    px, py = pose.x, pose.y
    return tuple((px + c * x - s * y, py + s * x + c * y) for x, y in shape.vertices), 0.0


def contains_point(shape: Shape, pose: Pose2, p: Point) -> bool:
    """Closed containment test, used by oracles and rendering checks."""
    core, r = world_core(shape, pose)
    if len(core) == 1:
        return (p[0] - core[0][0]) ** 2 + (p[1] - core[0][1]) ** 2 <= r * r
    n = len(core)
    for i in range(n):
        ax, ay = core[i]
        bx, by = core[(i + 1) % n]
        if (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax) < 0.0:
            return False
    return True


# ---------------------------------------------------------------------------
# core-level primitives


def _closest_on_segment(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    ll = dx * dx + dy * dy
    if ll <= 0.0:
        return ax, ay
    t = ((px - ax) * dx + (py - ay) * dy) / ll
    if t <= 0.0:
        return ax, ay
    if t >= 1.0:
        return bx, by
    return ax + t * dx, ay + t * dy


def point_segment_distance(px, py, ax, ay, bx, by) -> float:
    cx, cy = _closest_on_segment(px, py, ax, ay, bx, by)
    return math.hypot(px - cx, py - cy)


def segment_distance(a0: Point, a1: Point, b0: Point, b1: Point) -> float:
    """Euclidean distance between two closed segments (0 if they cross)."""
    ax, ay = a0
    bx, by = a1
    cx, cy = b0
    dx, dy = b1
    d1 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    d2 = (bx - ax) * (dy - ay) - (by - ay) * (dx - ax)
    d3 = (dx - cx) * (ay - cy) - (dy - cy) * (ax - cx)
    d4 = (dx - cx) * (by - cy) - (dy - cy) * (bx - cx)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return 0.0
    return min(
        point_segment_distance(ax, ay, cx, cy, dx, dy),
        point_segment_distance(bx, by, cx, cy, dx, dy),
        point_segment_distance(cx, cy, ax, ay, bx, by),
        point_segment_distance(dx, dy, ax, ay, bx, by),
    )


def _edges(core: Core):
    n = len(core)
    if n == 1:
        return ((core[0], core[0]),)
    if n == 2:
        return ((core[0], core[1]),)
    return tuple((core[i], core[(i + 1) % n]) for i in range(n))


def _axes(core: Core):
    n = len(core)
    if n == 1:
        return []
    out = []
    m = 1 if n == 2 else n
    for i in range(m):
        ax, ay = core[i]
        bx, by = core[(i + 1) % n]
        dx, dy = bx - ax, by - ay
        ll = math.hypot(dx, dy)
        if ll == 0.0:
            continue
        out.append((-dy / ll, dx / ll))
        if n == 2:
            out.append((dx / ll, dy / ll))
    return out


def _project(core: Core, nx: float, ny: float):
    lo = hi = core[0][0] * nx + core[0][1] * ny
    for x, y in core[1:]:
        d = x * nx + y * ny
        if d < lo:
            lo = d
        elif d > hi:
            hi = d
    return lo, hi


def _sat(a: Core, b: Core):
    """Separating-axis test on cores.

    Returns ``None`` when a separating axis exists, else ``(overlap, nx, ny)``
    with the normal oriented so that moving ``a`` by ``overlap * n`` separates
    the cores.  The candidate axis set is a superset of the Minkowski
    difference edge normals, so the minimum overlap is the exact MTV.
    """
    axes = _axes(a) + _axes(b)
    if not axes:
        dx = a[0][0] - b[0][0]
        dy = a[0][1] - b[0][1]
        if dx == 0.0 and dy == 0.0:
            return 0.0, 1.0, 0.0
        return None
    best = math.inf
    bn = (1.0, 0.0)
    for nx, ny in axes:
        alo, ahi = _project(a, nx, ny)
        blo, bhi = _project(b, nx, ny)
        if ahi < blo or bhi < alo:
            return None
        push_pos = bhi - alo
        push_neg = ahi - blo
        if push_pos <= push_neg:
            if push_pos < best:
                best, bn = push_pos, (nx, ny)
        elif push_neg < best:
            best, bn = push_neg, (-nx, -ny)
    return best, bn[0], bn[1]


def _core_closest(a: Core, b: Core):
    """Closest points between disjoint cores: vertex-to-edge in both directions."""
    best = math.inf
    out = (a[0], b[0])
    eb = _edges(b)
    for px, py in a:
        for (ax, ay), (bx, by) in eb:
            cx, cy = _closest_on_segment(px, py, ax, ay, bx, by)
            d = (px - cx) ** 2 + (py - cy) ** 2
            if d < best:
                best, out = d, ((px, py), (cx, cy))
    ea = _edges(a)
    for px, py in b:
        for (ax, ay), (bx, by) in ea:
            cx, cy = _closest_on_segment(px, py, ax, ay, bx, by)
            d = (px - cx) ** 2 + (py - cy) ** 2
            if d < best:
                best, out = d, ((cx, cy), (px, py))
    return math.sqrt(best), out[0], out[1]


def core_penetration(a: Core, ra: float, b: Core, rb: float):
    """Signed penetration between inflated cores.

    Returns ``(pen, nx, ny)`` where ``pen = ra + rb - dist`` for disjoint cores
    (negative when separated) and the normal points from ``b`` to ``a``.
    """
    if len(a) == 1 and len(b) == 1:
        dx = a[0][0] - b[0][0]
        dy = a[0][1] - b[0][1]
        d = math.hypot(dx, dy)
        if d == 0.0:
            return ra + rb, 1.0, 0.0
        return ra + rb - d, dx / d, dy / d
    sat = _sat(a, b)
    if sat is not None:
        overlap, nx, ny = sat
        return overlap + ra + rb, nx, ny
    d, pa, pb = _core_closest(a, b)
    if d == 0.0:
        # touching cores that SAT reported as separated by rounding
        return ra + rb, 1.0, 0.0
    return ra + rb - d, (pa[0] - pb[0]) / d, (pa[1] - pb[1]) / d


def core_collide(a: Core, ra: float, b: Core, rb: float) -> bool:
    return core_penetration(a, ra, b, rb)[0] >= 0.0


# ---------------------------------------------------------------------------
# public shape-level API


def collide(shape_a: Shape, pose_a: Pose2, shape_b: Shape, pose_b: Pose2) -> bool:
    """True iff the closed regions intersect (touching counts)."""
    ca, ra = world_core(shape_a, pose_a)
    cb, rb = world_core(shape_b, pose_b)
    return core_collide(ca, ra, cb, rb)


def penetration_depth(
    shape_a: Shape, pose_a: Pose2, shape_b: Shape, pose_b: Pose2
) -> Tuple[float, Tuple[float, float]]:
    """Penetration depth and the unit normal pointing from ``b`` to ``a``.

    Translating ``a`` by ``depth * normal`` brings the pair to touching
    contact.  Separated pairs report depth 0 with the separating direction.
    """
    ca, ra = world_core(shape_a, pose_a)
    cb, rb = world_core(shape_b, pose_b)
    pen, nx, ny = core_penetration(ca, ra, cb, rb)
    return max(pen, 0.0), (nx, ny)


def bounding_radius(shape: Shape) -> float:
    return shape.bounding_radius


def segment_points(a: Sequence[float], b: Sequence[float]) -> Core:
    return ((float(a[0]), float(a[1])), (float(b[0]), float(b[1])))


@dataclass(frozen=True, slots=True)
class Rect:
    """Closed axis-aligned rectangle."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def center(self) -> Point:
        return (0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def contains_rect(self, other: "Rect") -> bool:
        return (
            self.xmin <= other.xmin
            and self.ymin <= other.ymin
            and other.xmax <= self.xmax
            and other.ymax <= self.ymax
        )

    def clamp(self, x: float, y: float) -> Point:
        return (min(max(x, self.xmin), self.xmax), min(max(y, self.ymin), self.ymax))

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)
