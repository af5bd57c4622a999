"""Three-link planar arm: kinematics, IK and twist-to-joint projection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import Pose2, wrap_angle

Config = Tuple[float, float, float]

# singular values below this are treated as rank loss in the projection
SINGULAR_VALUE_TOL = 1e-2
# relative least-squares residual above which a twist is not realizable
RESIDUAL_TOL = 1e-3
# projections may not end a substep closer than this to the elbow singularity,
# measured by |det J| / ||J||_F^2 (a lower bound on the smallest singular value)
CONDITIONING_MIN = 5e-3
# per-substep endpoint refinement of the projected rates
NEWTON_STEPS = 2
NEWTON_TOL = 1e-9


@dataclass(frozen=True)
class ArmSpec:
    link_lengths: Tuple[float, float, float] = (0.5, 0.4, 0.3)
    joint_limits: Tuple[Tuple[float, float], ...] = ((-2.9, 2.9),) * 3
    link_width: float = 0.04
    base_pose: Pose2 = field(default_factory=lambda: Pose2(0.0, 0.0, math.pi / 2))
    ee_radius: float = 0.02
    max_joint_speed: float = 3.0
    # length of the flat pusher face across the end-effector heading; 0 = disc
    ee_width: float = 0.08

    def __post_init__(self):
        object.__setattr__(self, "link_lengths", tuple(float(v) for v in self.link_lengths))
        object.__setattr__(
            self, "joint_limits", tuple((float(a), float(b)) for a, b in self.joint_limits)
        )
        if len(self.link_lengths) != 3 or len(self.joint_limits) != 3:
            raise ValueError("ArmSpec describes exactly three links")
        if any(v <= 0 for v in self.link_lengths):
            raise ValueError("link lengths must be positive")
        if any(lo >= hi for lo, hi in self.joint_limits):
            raise ValueError("joint limits need min < max")
        if self.ee_radius <= 0 or self.ee_width < 0:
            raise ValueError("end-effector needs ee_radius > 0 and ee_width >= 0")

    @property
    def reach(self) -> float:
        return sum(self.link_lengths)

    @property
    def ee_extent(self) -> float:
        """Bounding radius of the end-effector around its center."""
        return self.ee_radius + 0.5 * self.ee_width

    def within_limits(self, config: Sequence[float]) -> bool:
        return all(lo <= q <= hi for q, (lo, hi) in zip(config, self.joint_limits))


@dataclass(frozen=True)
class JointControl:
    """Piecewise-constant joint velocity profile: ``((rates, dt), ...)``."""

    joint_velocity_profile: Tuple[Tuple[Config, float], ...]

    @property
    def duration(self) -> float:
        return sum(dt for _, dt in self.joint_velocity_profile)

    def integrate(self, start: Sequence[float]) -> Config:
        q0, q1, q2 = start
        for (u0, u1, u2), dt in self.joint_velocity_profile:
            q0 += u0 * dt
            q1 += u1 * dt
            q2 += u2 * dt
        return (q0, q1, q2)


def joint_positions(config: Sequence[float], spec: ArmSpec):
    """Base, elbow, wrist and end-effector points of the chain."""
    b = spec.base_pose
    x, y, phi = b.x, b.y, b.theta
    pts = [(x, y)]
    for q, l in zip(config, spec.link_lengths):
        phi += q
        x += l * math.cos(phi)
        y += l * math.sin(phi)
        pts.append((x, y))
    return pts


def fk(config: Sequence[float], spec: ArmSpec) -> Pose2:
    x, y, phi = _fk_raw(config, spec)
    return Pose2(x, y, phi)


def _fk_raw(config, spec):
    b = spec.base_pose
    x, y, phi = b.x, b.y, b.theta
    for q, l in zip(config, spec.link_lengths):
        phi += q
        x += l * math.cos(phi)
        y += l * math.sin(phi)
    return x, y, phi


def ee_core(config: Sequence[float], spec: ArmSpec):
    """End-effector collision core and radius: a point or a pusher segment."""
    x, y, phi = _fk_raw(config, spec)
    if spec.ee_width == 0.0:
        return ((x, y),), spec.ee_radius
    hx = -0.5 * spec.ee_width * math.sin(phi)
    hy = 0.5 * spec.ee_width * math.cos(phi)
    return ((x - hx, y - hy), (x + hx, y + hy)), spec.ee_radius


def jacobian(config: Sequence[float], spec: ArmSpec) -> np.ndarray:
    """Analytic 3x3 Jacobian mapping joint rates to (vx, vy, omega)."""
    phi = spec.base_pose.theta
    cs, sn = [], []
    for q, l in zip(config, spec.link_lengths):
        phi += q
        cs.append(l * math.cos(phi))
        sn.append(l * math.sin(phi))
    J = np.ones((3, 3))
    for k in range(3):
        J[0, k] = -sum(sn[k:])
        J[1, k] = sum(cs[k:])
    return J


def _pose_error(target: Pose2, x, y, phi):
    return np.array([target.x - x, target.y - y, wrap_angle(target.theta - phi)])


def ik(
    target: Pose2,
    spec: ArmSpec,
    seed_config: Sequence[float],
    rng: Optional[np.random.Generator] = None,
    restarts: int = 8,
    tol: float = 1e-9,
    max_iter: int = 100,
) -> Optional[Config]:
    """Damped least-squares IK from ``seed_config`` plus random restarts.

    Returns joint angles inside the limits whose FK matches ``target`` to
    1e-6 in position and orientation, or ``None``.
    """
    b = spec.base_pose
    if math.hypot(target.x - b.x, target.y - b.y) > spec.reach + 1e-9:
        return None
    if rng is None:
        rng = np.random.default_rng(0)
    lo = np.array([l for l, _ in spec.joint_limits])
    hi = np.array([h for _, h in spec.joint_limits])
    starts = [np.clip(np.asarray(seed_config, dtype=float), lo, hi)]
    for _ in range(restarts):
        starts.append(rng.uniform(lo, hi))
    for q in starts:
        lam = 1e-2
        err = _pose_error(target, *_fk_raw(q, spec))
        enorm = float(np.linalg.norm(err))
        for _ in range(max_iter):
            if enorm < tol:
                break
            J = jacobian(q, spec)
            dq = J.T @ np.linalg.solve(J @ J.T + lam * lam * np.eye(3), err)
            qn = np.clip(q + dq, lo, hi)
            en = _pose_error(target, *_fk_raw(qn, spec))
            nn = float(np.linalg.norm(en))
            if nn < enorm:
                q, err, enorm = qn, en, nn
                lam = max(lam * 0.5, 1e-6)
            else:
                lam *= 4.0
                if lam > 1e3:
                    break
        if np.all(np.abs(err[:2]) <= 1e-6) and abs(err[2]) <= 1e-6:
            return (float(q[0]), float(q[1]), float(q[2]))
    # clamped iterations stall when only one elbow branch fits the limits
    for q in _closed_form(target, spec, seed_config):
        err = _pose_error(target, *_fk_raw(q, spec))
        if np.all(np.abs(err[:2]) <= 1e-6) and abs(err[2]) <= 1e-6:
            return q
    return None


def _closed_form(target: Pose2, spec: ArmSpec, seed_config) -> List[Config]:
    """Both elbow solutions inside the limits, nearest to the seed first."""
    l1, l2, l3 = spec.link_lengths
    b = spec.base_pose
    phi = target.theta - b.theta
    dx, dy = target.x - b.x, target.y - b.y
    c, s = math.cos(-b.theta), math.sin(-b.theta)
    x, y = c * dx - s * dy, s * dx + c * dy  # base frame
    wx, wy = x - l3 * math.cos(phi), y - l3 * math.sin(phi)
    c2 = (wx * wx + wy * wy - l1 * l1 - l2 * l2) / (2 * l1 * l2)
    if abs(c2) > 1.0 + 1e-12:
        return []
    c2 = max(-1.0, min(1.0, c2))
    out = []
    for q2 in (math.acos(c2), -math.acos(c2)):
        q1 = math.atan2(wy, wx) - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
        q = (wrap_angle(q1), wrap_angle(q2), wrap_angle(phi - q1 - q2))
        if spec.within_limits(q):
            out.append(q)
    seed = np.asarray(seed_config, dtype=float)
    out.sort(key=lambda q: float(np.sum((np.asarray(q) - seed) ** 2)))
    return out


def _lstsq_rates(J: np.ndarray, v: np.ndarray):
    """Truncated-SVD pseudo-inverse solve; returns (rates, relative residual)."""
    U, S, Vt = np.linalg.svd(J)
    coeff = U.T @ v
    keep = S > SINGULAR_VALUE_TOL
    u = Vt.T[:, keep] @ (coeff[keep] / S[keep])
    vn = float(np.linalg.norm(v))
    if vn == 0.0:
        return u, 0.0
    return u, float(np.linalg.norm(J @ u - v)) / vn


def conditioning(config: Sequence[float], spec: ArmSpec) -> float:
    """``|det J| / ||J||_F^2``; zero exactly at the elbow singularity."""
    phi = spec.base_pose.theta
    l1, l2, l3 = spec.link_lengths
    phi1 = phi + config[0]
    phi2 = phi1 + config[1]
    phi3 = phi2 + config[2]
    c1, s1 = l1 * math.cos(phi1), l1 * math.sin(phi1)
    c2, s2 = l2 * math.cos(phi2), l2 * math.sin(phi2)
    c3, s3 = l3 * math.cos(phi3), l3 * math.sin(phi3)
    a2, b2 = -s3 - s2, c3 + c2
    a1, b1 = a2 - s1, b2 + c1
    frob = a1 * a1 + a2 * a2 + s3 * s3 + b1 * b1 + b2 * b2 + c3 * c3 + 3.0
    return abs(l1 * l2 * math.sin(config[1])) / frob


def _rates(config, spec: ArmSpec, v):
    """Joint rates for twist ``v`` at ``config``.

    When the smallest singular value provably exceeds the truncation
    threshold (``|det| / ||J||_F^2`` is a lower bound for it) the
    pseudo-inverse is the plain inverse, solved by cofactors; otherwise the
    truncated SVD decides.
    """
    phi = spec.base_pose.theta
    l1, l2, l3 = spec.link_lengths
    phi1 = phi + config[0]
    phi2 = phi1 + config[1]
    phi3 = phi2 + config[2]
    c1, s1 = l1 * math.cos(phi1), l1 * math.sin(phi1)
    c2, s2 = l2 * math.cos(phi2), l2 * math.sin(phi2)
    c3, s3 = l3 * math.cos(phi3), l3 * math.sin(phi3)
    a3 = -s3
    a2 = a3 - s2
    a1 = a2 - s1
    b3 = c3
    b2 = b3 + c2
    b1 = b2 + c1
    det = a1 * (b2 - b3) - a2 * (b1 - b3) + a3 * (b1 - b2)
    frob = a1 * a1 + a2 * a2 + a3 * a3 + b1 * b1 + b2 * b2 + b3 * b3 + 3.0
    if abs(det) > SINGULAR_VALUE_TOL * frob:
        vx, vy, om = v
        inv = 1.0 / det
        # cofactor expansion of [[a1 a2 a3] [b1 b2 b3] [1 1 1]]^-1
        u0 = ((b2 - b3) * vx + (a3 - a2) * vy + (a2 * b3 - a3 * b2) * om) * inv
        u1 = ((b3 - b1) * vx + (a1 - a3) * vy + (a3 * b1 - a1 * b3) * om) * inv
        u2 = ((b1 - b2) * vx + (a2 - a1) * vy + (a1 * b2 - a2 * b1) * om) * inv
        return (u0, u1, u2), 0.0
    J = np.array([[a1, a2, a3], [b1, b2, b3], [1.0, 1.0, 1.0]])
    u, res = _lstsq_rates(J, np.asarray(v, dtype=float))
    return (float(u[0]), float(u[1]), float(u[2])), res


def project_twist(
    twist: Tuple[float, float, float],
    duration: float,
    start_config: Sequence[float],
    spec: ArmSpec,
    substep_dt: float,
    is_valid: Optional[Callable[[Config], bool]] = None,
):
    """Closed-loop per-substep projection of an end-effector twist.

    Returns ``(profile, configs)`` with one config per substep boundary
    (``configs[0]`` is the start), or ``None`` on a joint-limit, singularity,
    joint-speed or validity failure.  Substeps may not end near the elbow
    singularity (see ``CONDITIONING_MIN``), where almost no twist is
    realizable any more.
    """
    n = max(1, int(round(duration / substep_dt)))
    h = duration / n
    vx, vy, om = twist
    q = (float(start_config[0]), float(start_config[1]), float(start_config[2]))
    configs = [q]
    profile = []
    if vx == 0.0 and vy == 0.0 and om == 0.0:
        zero = ((0.0, 0.0, 0.0), h)
        return tuple(zero for _ in range(n)), [q] * (n + 1)
    x0, y0, p0 = _fk_raw(q, spec)
    for k in range(n):
        t = (k + 1) * h
        x, y, phi = _fk_raw(q, spec)
        v_eff = (
            (x0 + vx * t - x) / h,
            (y0 + vy * t - y) / h,
            wrap_angle(p0 + om * t - phi) / h,
        )
        u, res = _rates(q, spec, v_eff)
        if res > RESIDUAL_TOL:
            return None
        # Newton-correct the constant rate so the substep lands on the target
        tx, ty, tp = x0 + vx * t, y0 + vy * t, p0 + om * t
        for _ in range(NEWTON_STEPS):
            qn = (q[0] + u[0] * h, q[1] + u[1] * h, q[2] + u[2] * h)
            x, y, phi = _fk_raw(qn, spec)
            e = (tx - x, ty - y, wrap_angle(tp - phi))
            if abs(e[0]) + abs(e[1]) + abs(e[2]) < NEWTON_TOL:
                break
            du, _ = _rates(qn, spec, (e[0] / h, e[1] / h, e[2] / h))
            u = (u[0] + du[0], u[1] + du[1], u[2] + du[2])
        if max(abs(u[0]), abs(u[1]), abs(u[2])) > spec.max_joint_speed:
            return None
        q = (q[0] + u[0] * h, q[1] + u[1] * h, q[2] + u[2] * h)
        if not spec.within_limits(q):
            return None
        if conditioning(q, spec) < CONDITIONING_MIN:
            return None
        if is_valid is not None and not is_valid(q):
            return None
        profile.append((u, h))
        configs.append(q)
    return tuple(profile), configs


def jacobian_projection(
    v,
    start_config: Sequence[float],
    spec: ArmSpec,
    substep_dt: float,
    is_valid: Optional[Callable[[Config], bool]] = None,
) -> Optional[JointControl]:
    """Map a :class:`~kdrrf.physics.Twist2` to joint rates via J^+ per substep."""
    out = project_twist((v.vx, v.vy, v.omega), v.duration, start_config, spec, substep_dt, is_valid)
    if out is None:
        return None
    return JointControl(out[0])
