"""System state, scenario description and the state-validity predicate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

from .arm import ArmSpec, ee_core, joint_positions
from .geometry import (
    Pose2,
    Rect,
    Shape,
    core_collide,
    core_penetration,
    point_segment_distance,
    segment_distance,
    world_core,
)
from .params import Params
from .tasks import TaskSpec


class ContractViolation(ValueError):
    """A caller broke an operation's precondition."""


@dataclass(frozen=True, slots=True)
class ObjectState:
    pose: Pose2
    shape_id: int
    class_id: int = 0


@dataclass(frozen=True, slots=True)
class SystemState:
    arm: Tuple[float, float, float]
    objects: Tuple[ObjectState, ...]

    def with_arm(self, arm: Sequence[float]) -> "SystemState":
        return SystemState(tuple(float(a) for a in arm), self.objects)

    def positions(self):
        return [(o.pose.x, o.pose.y) for o in self.objects]


@dataclass(frozen=True)
class Obstacle:
    shape: Shape
    pose: Pose2


@dataclass(frozen=True)
class Scenario:
    workspace: Rect
    shapes: Tuple[Shape, ...]
    initial_state: SystemState
    task: TaskSpec
    num_classes: int = 1
    static_obstacles: Tuple[Obstacle, ...] = ()
    goal_regions: Optional[Tuple[Rect, ...]] = None
    params: Params = field(default_factory=Params)
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for o in self.initial_state.objects:
            if not 0 <= o.shape_id < len(self.shapes):
                raise ValueError(f"shape_id {o.shape_id} out of range")
            if not 0 <= o.class_id < self.num_classes:
                raise ValueError(f"class_id {o.class_id} out of range")
        needs_regions = self.task.kind == "sorting_regions"
        if needs_regions != (self.goal_regions is not None):
            raise ValueError("goal_regions are required exactly for sorting_regions tasks")

    @property
    def num_objects(self) -> int:
        return len(self.initial_state.objects)

    @property
    def arm(self) -> ArmSpec:
        return self.params.arm

    def with_params(self, params: Params) -> "Scenario":
        return replace(self, params=params)


# ---------------------------------------------------------------------------
# robot geometry


def robot_cores(config: Sequence[float], spec: ArmSpec):
    """Link capsules and end-effector disc as ``[(core, radius), ...]``."""
    pts = joint_positions(config, spec)
    w = 0.5 * spec.link_width
    links = [((pts[i], pts[i + 1]), w) for i in range(3)]
    return links, ee_core(config, spec)


def robot_valid(config: Sequence[float], scenario: Scenario) -> bool:
    """Joint limits, no static-obstacle contact, no non-adjacent self-contact."""
    spec = scenario.params.arm
    if not spec.within_limits(config):
        return False
    pts = joint_positions(config, spec)
    w = 0.5 * spec.link_width
    # link 1 against link 3 and the end-effector
    if segment_distance(pts[0], pts[1], pts[2], pts[3]) <= 2 * w:
        return False
    ec, er = ee_core(config, spec)
    if len(ec) == 1:
        near = point_segment_distance(*ec[0], *pts[0], *pts[1])
    else:
        near = segment_distance(ec[0], ec[1], pts[0], pts[1])
    if near <= w + er:
        return False
    if not scenario.static_obstacles:
        return True
    parts = [((pts[i], pts[i + 1]), w) for i in range(3)] + [(ec, er)]
    for oc, orad, (ox, oy, obr) in static_cores(scenario):
        for pc, pr in parts:
            if len(pc) == 2:
                near = point_segment_distance(ox, oy, *pc[0], *pc[1])
            else:
                near = math.hypot(ox - pc[0][0], oy - pc[0][1])
            if near > obr + pr:
                continue
            if core_collide(pc, pr, oc, orad):
                return False
    return True


def static_cores(s: Scenario):
    """World-frame obstacle cores with bounding circles, cached per scenario."""
    cache = s.__dict__.get("_static_cores")
    if cache is None:
        cache = [
            world_core(o.shape, o.pose) + ((o.pose.x, o.pose.y, o.shape.bounding_radius),)
            for o in s.static_obstacles
        ]
        s.__dict__["_static_cores"] = cache
    return cache


def ee_penetration(config: Sequence[float], state: SystemState, scenario: Scenario) -> float:
    """Deepest end-effector penetration into any movable object (<0 when clear).

    Links ride above the objects; only the end-effector reaches table height.
    """
    spec = scenario.params.arm
    c, r = ee_core(config, spec)
    ex = sum(p[0] for p in c) / len(c)
    ey = sum(p[1] for p in c) / len(c)
    r_ext = spec.ee_extent
    shapes = scenario.shapes
    worst = -math.inf
    for o in state.objects:
        shape = shapes[o.shape_id]
        br = shape.bounding_radius + r_ext
        dx, dy = o.pose.x - ex, o.pose.y - ey
        if dx * dx + dy * dy > br * br:
            worst = max(worst, br - math.sqrt(dx * dx + dy * dy))
            continue
        oc, orad = world_core(shape, o.pose)
        worst = max(worst, core_penetration(c, r, oc, orad)[0])
    return worst


def check_structure(q: SystemState, s: Scenario) -> None:
    if len(q.objects) != s.num_objects:
        raise ContractViolation(
            f"state has {len(q.objects)} objects, scenario has {s.num_objects}"
        )
    if len(q.arm) != 3:
        raise ContractViolation("arm state must have 3 joint angles")


def is_state_valid(q: SystemState, s: Scenario) -> bool:
    """Membership in the valid state space.

    Object contacts with each other, with obstacles and with the robot are
    allowed; only arm limits, object centroids inside the workspace and
    robot-obstacle / self collisions matter.
    """
    check_structure(q, s)
    ws = s.workspace
    for o in q.objects:
        if not ws.contains(o.pose.x, o.pose.y):
            return False
    return robot_valid(q.arm, s)
