"""Contact-free transit paths in joint space (RRT-connect + greedy shortcutting).

During a transit the arm avoids static obstacles, itself, and every movable
object frozen at its current pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .arm import Config
from .params import TransitParams
from .world import ContractViolation, Scenario, SystemState, ee_penetration, robot_valid


@dataclass(frozen=True)
class JointPath:
    waypoints: Tuple[Config, ...]
    resolution: float

    @property
    def is_trivial(self) -> bool:
        return len(self.waypoints) == 1

    def length(self) -> float:
        """Path length in the max-norm (the joint that travels furthest)."""
        return sum(
            max(abs(b[k] - a[k]) for k in range(3))
            for a, b in zip(self.waypoints, self.waypoints[1:])
        )


class Meter:
    """Work counter shared by the planners for the virtual clock."""

    __slots__ = ("checks", "substeps")

    def __init__(self):
        self.checks = 0
        self.substeps = 0


def transit_config_free(config: Sequence[float], frozen: SystemState, s: Scenario) -> bool:
    """Valid arm whose end-effector pushes nothing.

    Resting contact (penetration within the physics contact tolerance) is
    tolerated so a transit may start from where the last push ended.
    """
    if not robot_valid(config, s):
        return False
    return ee_penetration(config, frozen, s) <= s.params.physics.contact_tolerance


class _Checker:
    def __init__(self, frozen, s, resolution, meter):
        self.frozen = frozen
        self.s = s
        self.resolution = resolution
        self.meter = meter

    def point(self, c) -> bool:
        if self.meter is not None:
            self.meter.checks += 1
        return transit_config_free(c, self.frozen, self.s)

    def segment(self, a, b, resolution=None) -> bool:
        """Validate the interpolation ``a -> b`` (excluding ``a``)."""
        res = resolution or self.resolution
        span = max(abs(b[0] - a[0]), abs(b[1] - a[1]), abs(b[2] - a[2]))
        n = max(1, int(math.ceil(span / res)))
        for k in range(1, n + 1):
            t = k / n
            c = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2]))
            if not self.point(c):
                return False
        return True


class _Tree:
    def __init__(self, root, cap):
        self.q = np.empty((cap + 1, 3))
        self.q[0] = root
        self.parent = [-1]
        self.n = 1

    def nearest(self, c) -> int:
        d = self.q[: self.n] - c
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def add(self, c, parent) -> int:
        self.q[self.n] = c
        self.parent.append(parent)
        self.n += 1
        return self.n - 1

    def branch(self, i):
        out = []
        while i >= 0:
            out.append(tuple(float(v) for v in self.q[i]))
            i = self.parent[i]
        return out


def _steer(a, b, step):
    d = b - a
    span = float(np.max(np.abs(d)))
    if span <= step:
        return b, True
    return a + d * (step / span), False


def _rrt_connect(start, goal, chk: _Checker, s: Scenario, params: TransitParams, budget, rng):
    lo = np.array([l for l, _ in s.params.arm.joint_limits])
    hi = np.array([h for _, h in s.params.arm.joint_limits])
    ta, tb = _Tree(start, budget), _Tree(goal, budget)
    a_is_start = True
    step = params.step
    while ta.n + tb.n < budget:
        target = rng.uniform(lo, hi)
        i = ta.nearest(target)
        new, _ = _steer(ta.q[i], target, step)
        if chk.segment(tuple(ta.q[i]), tuple(new)):
            ia = ta.add(new, i)
            # greedy connect of the other tree toward the new node
            j = tb.nearest(new)
            while ta.n + tb.n < budget:
                nxt, reached = _steer(tb.q[j], new, step)
                if not chk.segment(tuple(tb.q[j]), tuple(nxt)):
                    break
                j = tb.add(nxt, j)
                if reached:
                    pa = ta.branch(ia)[::-1]
                    pb = tb.branch(j)[1:]
                    path = pa + pb
                    return path if a_is_start else path[::-1]
        ta, tb = tb, ta
        a_is_start = not a_is_start
    return None


def _shortcut(path, chk: _Checker, attempts, rng):
    pts = list(path)
    for _ in range(attempts):
        if len(pts) < 3:
            break
        i = int(rng.integers(0, len(pts) - 2))
        j = int(rng.integers(i + 2, len(pts)))
        if chk.segment(pts[i], pts[j]):
            pts = pts[: i + 1] + pts[j:]
    return pts


def _check_endpoint(c, frozen, s, name):
    if not transit_config_free(c, frozen, s):
        raise ContractViolation(f"transit {name} configuration is not contact-free")


def generate_path(
    from_config: Sequence[float],
    to_config: Sequence[float],
    frozen_state: SystemState,
    s: Scenario,
    budget: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    meter: Optional[Meter] = None,
    params: Optional[TransitParams] = None,
) -> Optional[JointPath]:
    params = params or s.params.transit
    budget = params.budget if budget is None else budget
    a = tuple(float(v) for v in from_config)
    b = tuple(float(v) for v in to_config)
    _check_endpoint(a, frozen_state, s, "start")
    _check_endpoint(b, frozen_state, s, "goal")
    if a == b:
        return JointPath((a,), params.resolution)
    chk = _Checker(frozen_state, s, params.resolution, meter)
    if chk.segment(a, b):
        return JointPath((a, b), params.resolution)
    rng = rng if rng is not None else np.random.default_rng(0)
    path = _rrt_connect(np.array(a), np.array(b), chk, s, params, budget, rng)
    if path is None:
        return None
    path[0], path[-1] = a, b
    path = _shortcut(path, chk, params.shortcut_attempts, rng)
    return JointPath(tuple(path), params.resolution)


def exists_path(
    from_config: Sequence[float],
    to_config: Sequence[float],
    frozen_state: SystemState,
    s: Scenario,
    budget: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    meter: Optional[Meter] = None,
) -> bool:
    """Connectivity verdict; ``False`` means the budget ran out."""
    params = s.params.transit
    budget = params.exists_budget if budget is None else budget
    return generate_path(from_config, to_config, frozen_state, s, budget, rng, meter,
                         params=_no_shortcut(params)) is not None


def _no_shortcut(p: TransitParams) -> TransitParams:
    return replace(p, shortcut_attempts=0)


def validate_path(path: JointPath, frozen_state: SystemState, s: Scenario, resolution: float) -> bool:
    """Independent re-check of every waypoint and interpolated sample."""
    chk = _Checker(frozen_state, s, resolution, None)
    if not chk.point(path.waypoints[0]):
        return False
    return all(chk.segment(a, b, resolution) for a, b in zip(path.waypoints, path.waypoints[1:]))
