"""Deterministic quasi-static planar pushing.

Each substep moves the arm kinematically (closed-loop Jacobian projection of
the commanded twist), then resolves penetrations by Gauss-Seidel projection
in ascending object order: objects yield fully to the end-effector, split
overlaps between each other evenly and never move static obstacles.
Objects carry no velocity, so they stop as soon as the pusher does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

from .arm import JointControl, ee_core, project_twist
from .geometry import Disc, Pose2, core_penetration, world_core
from .params import PhysicsParams
from .world import ObjectState, Scenario, SystemState, robot_valid, static_cores

DEFAULT_PHYSICS = PhysicsParams()


class InfeasibleControl(Exception):
    """The twist cannot be executed from this state (arm or jam failure)."""


@dataclass(frozen=True, slots=True)
class Twist2:
    """End-effector twist in world coordinates held for ``duration`` seconds."""

    vx: float
    vy: float
    omega: float
    duration: float = 0.5

    def is_zero(self) -> bool:
        return self.vx == 0.0 and self.vy == 0.0 and self.omega == 0.0

    def within(self, linear: float, angular: float) -> bool:
        return abs(self.vx) <= linear and abs(self.vy) <= linear and abs(self.omega) <= angular


@dataclass
class Sweep:
    """Outcome of simulating one twist.

    ``state``/``control`` are ``None`` when infeasible; ``in_manifold`` is
    false if any intermediate state left the valid set; ``substates`` is
    filled only when recording.
    """

    state: Optional[SystemState]
    control: Optional[JointControl]
    in_manifold: bool
    reason: str = ""
    substates: Optional[List[SystemState]] = None
    substeps: int = 0


class _Bodies:
    """Mutable working copy of the object poses during a sweep."""

    __slots__ = ("xs", "ys", "ths", "shapes", "brs", "discs", "moved", "src")

    def __init__(self, q: SystemState, s: Scenario):
        objs = q.objects
        self.src = objs
        self.xs = [o.pose.x for o in objs]
        self.ys = [o.pose.y for o in objs]
        self.ths = [o.pose.theta for o in objs]
        self.shapes = [s.shapes[o.shape_id] for o in objs]
        self.brs = [sh.bounding_radius for sh in self.shapes]
        self.discs = [isinstance(sh, Disc) for sh in self.shapes]
        self.moved = [False] * len(objs)

    def core(self, i):
        if self.discs[i]:
            return ((self.xs[i], self.ys[i]),), self.shapes[i].radius
        return world_core(self.shapes[i], Pose2(self.xs[i], self.ys[i], self.ths[i]))

    def objects(self):
        out = []
        for i, o in enumerate(self.src):
            if self.moved[i]:
                out.append(ObjectState(Pose2(self.xs[i], self.ys[i], self.ths[i]), o.shape_id, o.class_id))
            else:
                out.append(o)
        return tuple(out)


def _support(core, nx, ny):
    best = -math.inf
    bp = core[0]
    for p in core:
        d = p[0] * nx + p[1] * ny
        if d > best:
            best, bp = d, p
    return bp


def _displace(b: _Bodies, i, dx, dy, other_core, other_r, nx, ny, coupling):
    """Translate object ``i`` and, for polygons, apply the torque heuristic."""
    if not b.discs[i] and coupling > 0.0:
        sx, sy = _support(other_core, nx, ny)
        cx = sx + nx * other_r - b.xs[i]
        cy = sy + ny * other_r - b.ys[i]
        rho = b.brs[i]
        b.ths[i] = b.ths[i] + coupling * (cx * dy - cy * dx) / (rho * rho)
        if not -math.pi < b.ths[i] <= math.pi:
            b.ths[i] = math.remainder(b.ths[i], 2 * math.pi)
    b.xs[i] += dx
    b.ys[i] += dy
    b.moved[i] = True


def _resolve(b: _Bodies, ee, static, p: PhysicsParams, active: List[bool], all_pairs: bool = False):
    """Iterative penetration projection; returns the residual penetration.

    Only objects touched by the end-effector, or transitively by moved
    objects, take part (``active``); with ``all_pairs`` every object does.
    """
    tol = p.contact_tolerance
    coupling = p.rotation_coupling
    n = len(b.xs)
    if ee is not None:
        ec, er = ee
        ex = sum(q[0] for q in ec) / len(ec)
        ey = sum(q[1] for q in ec) / len(ec)
        e_ext = er + (math.dist(ec[0], ec[-1]) * 0.5 if len(ec) > 1 else 0.0)
    worst = 0.0
    for _ in range(p.max_resolve_iters):
        worst = 0.0
        for i in range(n):
            if ee is not None:
                lim = b.brs[i] + e_ext
                dx, dy = b.xs[i] - ex, b.ys[i] - ey
                if dx * dx + dy * dy <= lim * lim:
                    ci, ri = b.core(i)
                    pen, nx, ny = core_penetration(ci, ri, ec, er)
                    if pen > tol:
                        worst = max(worst, pen)
                        _displace(b, i, pen * nx, pen * ny, ec, er, nx, ny, coupling)
                        active[i] = True
            if not (active[i] or all_pairs):
                continue
            for j in range(n):
                if j == i or ((active[j] or all_pairs) and j < i):
                    continue
                lim = b.brs[i] + b.brs[j]
                dx, dy = b.xs[i] - b.xs[j], b.ys[i] - b.ys[j]
                if dx * dx + dy * dy > lim * lim:
                    continue
                ci, ri = b.core(i)
                cj, rj = b.core(j)
                pen, nx, ny = core_penetration(ci, ri, cj, rj)
                if pen > tol:
                    worst = max(worst, pen)
                    h = 0.5 * pen
                    _displace(b, i, h * nx, h * ny, cj, rj, nx, ny, coupling)
                    _displace(b, j, -h * nx, -h * ny, ci, ri, -nx, -ny, coupling)
                    active[j] = True
            for oc, orad, (ox, oy, obr) in static:
                lim = b.brs[i] + obr
                dx, dy = b.xs[i] - ox, b.ys[i] - oy
                if dx * dx + dy * dy > lim * lim:
                    continue
                ci, ri = b.core(i)
                pen, nx, ny = core_penetration(ci, ri, oc, orad)
                if pen > tol:
                    worst = max(worst, pen)
                    _displace(b, i, pen * nx, pen * ny, oc, orad, nx, ny, coupling)
        if worst <= tol:
            return 0.0
    return _residual(b, ee, static, active, all_pairs)


def _residual(b: _Bodies, ee, static, active, all_pairs):
    worst = 0.0
    n = len(b.xs)
    for i in range(n):
        ci, ri = b.core(i)
        if ee is not None:
            worst = max(worst, core_penetration(ci, ri, ee[0], ee[1])[0])
        for j in range(i + 1, n):
            if all_pairs or active[i] or active[j]:
                cj, rj = b.core(j)
                worst = max(worst, core_penetration(ci, ri, cj, rj)[0])
        if active[i] or all_pairs:
            for oc, orad, _ in static:
                worst = max(worst, core_penetration(ci, ri, oc, orad)[0])
    return worst


def simulate(
    q: SystemState,
    v: Twist2,
    s: Scenario,
    p: Optional[PhysicsParams] = None,
    record: bool = False,
) -> Sweep:
    """Simulate ``v`` from ``q``; never raises for infeasible controls."""
    p = p or s.params.physics
    spec = s.params.arm
    n = max(1, int(round(v.duration / p.substep_dt)))
    if v.is_zero():
        control = JointControl(tuple(((0.0, 0.0, 0.0), v.duration / n) for _ in range(n)))
        subs = [q] * (n + 1) if record else None
        return Sweep(q, control, _objects_inside(q, s), "", subs, n)
    proj = project_twist(
        (v.vx, v.vy, v.omega), v.duration, q.arm, spec, p.substep_dt,
        is_valid=lambda c: robot_valid(c, s),
    )
    if proj is None:
        return Sweep(None, None, False, "projection", None, n)
    profile, configs = proj
    static = static_cores(s)
    bodies = _Bodies(q, s)
    active = [False] * len(bodies.xs)
    ws = s.workspace
    inside = True
    subs = [q] if record else None
    for k in range(1, len(configs)):
        residual = _resolve(bodies, ee_core(configs[k], spec), static, p, active)
        if residual > 10.0 * p.contact_tolerance:
            return Sweep(None, None, False, "jammed", None, n)
        if inside:
            for i in range(len(bodies.xs)):
                if bodies.moved[i] and not ws.contains(bodies.xs[i], bodies.ys[i]):
                    inside = False
                    break
        if record:
            subs.append(SystemState(configs[k], bodies.objects()))
    final = SystemState(configs[-1], bodies.objects())
    return Sweep(final, JointControl(profile), inside, "", subs, n)


def _objects_inside(q: SystemState, s: Scenario) -> bool:
    ws = s.workspace
    return all(ws.contains(o.pose.x, o.pose.y) for o in q.objects)


def transition(q: SystemState, v: Twist2, s: Scenario, p: Optional[PhysicsParams] = None) -> SystemState:
    """Post-sweep state of pushing with ``v``; raises :class:`InfeasibleControl`."""
    out = simulate(q, v, s, p)
    if out.state is None:
        raise InfeasibleControl(out.reason)
    return out.state


def sweep_manifold_check(q_start: SystemState, v: Twist2, s: Scenario, p: Optional[PhysicsParams] = None) -> bool:
    """Every intermediate state of the sweep is valid (the planar arm keeps
    the end-effector on the task manifold by construction)."""
    out = simulate(q_start, v, s, p)
    return out.state is not None and out.in_manifold and robot_valid(q_start.arm, s)


def resolve_all(q: SystemState, s: Scenario, p: Optional[PhysicsParams] = None) -> SystemState:
    """Push every penetrating object apart (used after perception noise)."""
    p = p or s.params.physics
    spec = s.params.arm
    bodies = _Bodies(q, s)
    active = [True] * len(bodies.xs)
    _resolve(bodies, ee_core(q.arm, spec), static_cores(s), p, active, all_pairs=True)
    return SystemState(q.arm, bodies.objects())
