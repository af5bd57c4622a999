"""Randomized benchmark scenarios for the four rearrangement tasks."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from .arm import fk
from .geometry import Disc, Polygon, Pose2, Rect, point_segment_distance
from .params import Params
from .tasks import TaskSpec, goal
from .world import ObjectState, Obstacle, Scenario, SystemState, ee_penetration, is_state_valid, robot_cores

MAX_REJECTIONS = 10_000


class PlacementError(RuntimeError):
    """Random placement kept failing; the named parameter packs too tightly."""


@dataclass(frozen=True)
class Knobs:
    """Difficulty knobs for :func:`generate_scenario`."""

    workspace: Tuple[float, float, float, float] = (-0.5, 0.3, 0.5, 0.9)
    object_radius: float = 0.035
    object_shape: str = "disc"  # or "box"
    gap: float = 0.01  # minimum initial clearance between objects
    home_config: Tuple[float, float, float] = (0.0, 1.9, 1.3)
    region_size: float = 0.3
    region_row: str = "far"  # or "middle"
    clutter_radius: float = 0.12
    cluster_d_in: float = 0.12
    separation_d_out: float = 0.3
    n_obstacles: int = 0
    obstacle_radius: float = 0.04


DESK = Knobs()
PAPER = Knobs(workspace=(-0.55, 0.25, 0.55, 0.95), object_radius=0.025, gap=0.005, region_size=0.22)


def goal_region_layout(ws: Rect, L: int, size: float, row: str = "far") -> Tuple[Rect, ...]:
    """``L`` square regions in a row along the far edge or across the middle."""
    if row == "middle":
        y0 = ws.center[1] - size / 2
        y1 = y0 + size
    else:
        y1 = ws.ymax - 0.02
        y0 = y1 - size
    span = ws.width - 0.04
    step = span / L
    out = []
    for k in range(L):
        cx = ws.xmin + 0.02 + step * (k + 0.5)
        half = min(size, step - 0.02) / 2
        out.append(Rect(cx - half, y0, cx + half, y1))
    return tuple(out)


def _make_task(kind, N, L, ws, knobs: Knobs, rng) -> TaskSpec:
    if kind == "sorting_regions":
        return TaskSpec(kind, goal_regions=goal_region_layout(ws, L, knobs.region_size, knobs.region_row))
    if kind == "sorting_free":
        return TaskSpec(kind, cluster_d_in=knobs.cluster_d_in, separation_d_out=knobs.separation_d_out)
    if kind == "relocating":
        size = knobs.region_size
        cx = float(rng.choice([-1.0, 1.0])) * (ws.width / 2 - size / 2 - 0.02) + ws.center[0]
        y1 = ws.ymax - 0.02
        return TaskSpec(kind, target_object=0, relocate_region=Rect(cx - size / 2, y1 - size, cx + size / 2, y1))
    return TaskSpec(kind, target_object=0, clutter_radius=knobs.clutter_radius)


def _check_counts(kind, N, L):
    if N < 1:
        raise ValueError("N must be at least 1")
    if L < 1:
        raise ValueError("L must be at least 1")
    if kind.startswith("sorting") and N < L:
        raise ValueError(f"N={N} objects cannot fill L={L} classes")


def _place_obstacles(knobs: Knobs, ws: Rect, regions, ee, params: Params, rng) -> List[Tuple[float, float]]:
    """Disc posts clear of the goal regions, the home end-effector and each other."""
    rad = knobs.obstacle_radius
    links, _ = robot_cores(knobs.home_config, params.arm)
    posts: List[Tuple[float, float]] = []
    rejections = 0
    while len(posts) < knobs.n_obstacles:
        x, y = rng.uniform(ws.xmin + rad, ws.xmax - rad), rng.uniform(ws.ymin + rad, ws.ymax - rad)
        clear = math.hypot(x - ee.x, y - ee.y) > rad + params.arm.ee_extent + 0.05
        clear = clear and all(math.hypot(x - px, y - py) > 2 * rad + 0.1 for px, py in posts)
        clear = clear and all(
            point_segment_distance(x, y, *a, *b) > rad + w + 0.02 for (a, b), w in links
        )
        clear = clear and not any(
            r.xmin - rad <= x <= r.xmax + rad and r.ymin - rad <= y <= r.ymax + rad for r in regions
        )
        if clear:
            posts.append((float(x), float(y)))
            continue
        rejections += 1
        if rejections >= MAX_REJECTIONS:
            raise PlacementError(
                f"could not place {knobs.n_obstacles} obstacles after {MAX_REJECTIONS} rejections; "
                "reduce n_obstacles"
            )
    return posts


def generate_scenario(
    kind: str,
    N: int,
    L: int = 1,
    seed: int = 0,
    knobs: Optional[Knobs] = None,
    params: Optional[Params] = None,
) -> Scenario:
    """Seeded random scenario; raises :class:`PlacementError` when over-packed.

    Objects start apart from each other, clear of the end-effector, and
    outside their own goal region.  Sorting tasks assign classes round-robin.
    """
    _check_counts(kind, N, L)
    knobs = knobs or DESK
    params = params or Params()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xA11]))
    ws = Rect(*knobs.workspace)
    task = _make_task(kind, N, L, ws, knobs, rng)
    if knobs.object_shape == "box":
        side = knobs.object_radius * math.sqrt(2.0)
        shape = Polygon.box(side, side)
    else:
        shape = Disc(knobs.object_radius)
    r = shape.bounding_radius
    classes = [k % L for k in range(N)] if kind.startswith("sorting") else [0] * N
    num_classes = L if kind.startswith("sorting") else 1
    home = tuple(float(v) for v in knobs.home_config)
    ee = fk(home, params.arm)
    regions = task.regions()
    margin = r + 0.005
    lo_x, hi_x = ws.xmin + margin, ws.xmax - margin
    lo_y, hi_y = ws.ymin + margin, ws.ymax - margin
    min_sep = 2 * r + knobs.gap

    placed: List[Tuple[float, float]] = []
    rejections = 0

    posts = _place_obstacles(knobs, ws, regions, ee, params, rng)
    post_r = knobs.obstacle_radius

    def ok(x, y, k):
        if math.hypot(x - ee.x, y - ee.y) < r + params.arm.ee_extent + knobs.gap:
            return False
        for px, py in posts:
            if math.hypot(x - px, y - py) < r + post_r + knobs.gap:
                return False
        for px, py in placed:
            if (x - px) ** 2 + (y - py) ** 2 < min_sep * min_sep:
                return False
        if kind == "sorting_regions" and regions[classes[k]].contains(x, y):
            return False
        if kind == "relocating" and k == task.target_object and regions[0].contains(x, y):
            return False
        return True

    for k in range(N):
        while True:
            if kind == "grasping" and k > 0:
                # clutter around the target
                tx, ty = placed[0]
                ang = rng.uniform(-math.pi, math.pi)
                d = rng.uniform(min_sep, 2.0 * task.clutter_radius)
                x, y = tx + d * math.cos(ang), ty + d * math.sin(ang)
                if not (lo_x <= x <= hi_x and lo_y <= y <= hi_y):
                    x, y = rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)
            elif kind == "grasping":
                x = rng.uniform(ws.xmin + 0.3 * ws.width, ws.xmax - 0.3 * ws.width)
                y = rng.uniform(ws.ymin + 0.3 * ws.height, ws.ymax - 0.3 * ws.height)
            else:
                x, y = rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)
            if ok(x, y, k):
                placed.append((float(x), float(y)))
                break
            rejections += 1
            if rejections >= MAX_REJECTIONS:
                raise PlacementError(
                    f"could not place {N} objects of radius {knobs.object_radius} with gap {knobs.gap} "
                    f"after {MAX_REJECTIONS} rejections; reduce N or object_radius"
                )

    thetas = rng.uniform(-math.pi, math.pi, size=N)
    objs = tuple(
        ObjectState(Pose2(x, y, float(thetas[k]) if knobs.object_shape == "box" else 0.0), 0, classes[k])
        for k, (x, y) in enumerate(placed)
    )
    q0 = SystemState(home, objs)
    s = Scenario(
        workspace=ws,
        shapes=(shape,),
        initial_state=q0,
        task=task,
        num_classes=num_classes,
        static_obstacles=tuple(Obstacle(Disc(post_r), Pose2(x, y)) for x, y in posts),
        goal_regions=task.goal_regions,
        params=params,
        seed=int(seed),
    )
    if not is_state_valid(q0, s) or ee_penetration(home, q0, s) > 0:
        raise PlacementError("home configuration is invalid for this workspace")
    if kind in ("grasping", "sorting_free") and goal(q0, task, params.arm):
        # already solved by chance: regenerate with the next seed stream
        return replace(generate_scenario(kind, N, L, seed + 1_000_003, knobs, params), seed=int(seed))
    return s
