"""Interleaved planning and execution with dynamic horizons.

Each cycle grows a fresh forest from the latest observed state until a
segment is worth executing, runs its transit and pushes, observes the
(possibly noisy) outcome and starts over.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .arm import JointControl
from .geometry import Pose2
from .params import ExecutionParams, Params
from .physics import Twist2, resolve_all, simulate
from .planner import (
    MotionPair,
    ProgressContext,
    evaluate_progress,
    expand_forest,
    spawn_forest,
)
from .tasks import goal, heuristic, progress_threshold
from .transit import JointPath, Meter, generate_path, validate_path
from .world import ContractViolation, ObjectState, Scenario, SystemState, check_structure

log = logging.getLogger(__name__)

# RNG stream ids under (seed, trial)
PLAN_STREAM, EXEC_STREAM, TRANSIT_STREAM = 0, 1, 2


def stream(seed: int, trial: int, which: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial), int(which)]))


@dataclass
class NoiseModel:
    """Additive Gaussian pose noise applied after every executed push."""

    sigma_pos: float = 0.0
    sigma_theta: float = 0.0
    rng: Optional[np.random.Generator] = None

    def __post_init__(self):
        if self.sigma_pos < 0 or self.sigma_theta < 0:
            raise ValueError("noise sigmas must be non-negative")
        if self.rng is None:
            self.rng = np.random.default_rng(0)

    @property
    def is_zero(self) -> bool:
        return self.sigma_pos == 0.0 and self.sigma_theta == 0.0

    def perturb(self, q: SystemState, s: Scenario) -> SystemState:
        """Noisy observation of ``q``: perturb, clamp, separate, clamp."""
        if self.is_zero:
            return q
        n = len(q.objects)
        dxy = self.rng.normal(0.0, 1.0, size=(n, 2)) * self.sigma_pos
        dth = self.rng.normal(0.0, 1.0, size=n) * self.sigma_theta
        ws = s.workspace
        objs = []
        for i, o in enumerate(q.objects):
            x, y = ws.clamp(o.pose.x + dxy[i, 0], o.pose.y + dxy[i, 1])
            objs.append(ObjectState(Pose2(x, y, o.pose.theta + dth[i]), o.shape_id, o.class_id))
        q2 = resolve_all(SystemState(q.arm, tuple(objs)), s)
        objs = []
        for o in q2.objects:
            x, y = ws.clamp(o.pose.x, o.pose.y)
            objs.append(ObjectState(Pose2(x, y, o.pose.theta), o.shape_id, o.class_id))
        return SystemState(q2.arm, tuple(objs))


@dataclass(frozen=True)
class ExecutedStep:
    twist: Twist2
    control: JointControl
    swept: SystemState  # physics outcome before observation noise
    observed: SystemState
    t_end: float


@dataclass(frozen=True)
class SegmentRecord:
    """One executed segment: transit, pushes and the observed end state."""

    pair: MotionPair
    transit: JointPath
    start: SystemState
    steps: Tuple[ExecutedStep, ...]
    observed: SystemState
    fallback: bool = False

    @property
    def aborted(self) -> bool:
        return len(self.steps) < len(self.pair.rearrange)


@dataclass
class EpisodeResult:
    success: bool
    wall_time: float
    planning_time: float
    num_rearranging_actions: int
    num_segments: int
    num_transits: int
    trajectory: List[SegmentRecord]
    seed: int
    trial: int = 0
    failure_reason: str = ""
    num_fallbacks: int = 0
    replanning_cycles: int = 0
    forest_warnings: int = 0
    final_state: Optional[SystemState] = None
    elapsed_real: float = field(default=0.0, compare=False)

    def summary(self) -> dict:
        return {
            "success": self.success,
            "wall_time": self.wall_time,
            "planning_time": self.planning_time,
            "actions": self.num_rearranging_actions,
            "segments": self.num_segments,
            "transits": self.num_transits,
            "fallbacks": self.num_fallbacks,
            "replanning_cycles": self.replanning_cycles,
            "failure_reason": self.failure_reason,
            "seed": self.seed,
            "trial": self.trial,
        }


class _Clock:
    """Budget accounting; the virtual mode charges work units, not seconds."""

    def __init__(self, ex: ExecutionParams):
        self.ex = ex
        self.virtual = ex.clock == "virtual"
        self.planning = 0.0
        self.execution = 0.0
        self._charged = (0, 0)
        self._t0 = time.perf_counter()

    def charge_planning(self, meter: Meter):
        if self.virtual:
            dc = meter.checks - self._charged[0]
            ds = meter.substeps - self._charged[1]
            self.planning += ds * self.ex.substep_cost + dc * self.ex.check_cost
            self._charged = (meter.checks, meter.substeps)
        else:
            now = time.perf_counter()
            self.planning += now - self._t0
            self._t0 = now

    def charge_execution(self, seconds: float):
        self.execution += seconds
        if not self.virtual:
            self._t0 = time.perf_counter()

    @property
    def total(self) -> float:
        return self.planning + self.execution


def execute_controls(
    q: SystemState,
    rearrange,
    s: Scenario,
    noise: Optional[NoiseModel] = None,
) -> SystemState:
    """Apply each twist, observing a noisy state after every one."""
    steps, _ = _execute(q, [r[0] for r in rearrange], s, noise or NoiseModel(), 0.0)
    return steps[-1].observed if steps else q


def _execute(q, twists, s, noise: NoiseModel, t0: float):
    steps = []
    t = t0
    for v in twists:
        sw = simulate(q, v, s)
        if sw.state is None or not sw.in_manifold:
            return steps, f"step {len(steps)} {sw.reason or 'left workspace'}"
        t += v.duration
        obs = noise.perturb(sw.state, s)
        steps.append(ExecutedStep(v, sw.control, sw.state, obs, t))
        q = obs
    return steps, ""


def _transit_ok(path: Optional[JointPath], q: SystemState, s: Scenario) -> bool:
    if path is None or path.waypoints[0] != q.arm:
        return False
    if path.is_trivial:
        return True
    return validate_path(path, q, s, path.resolution)


def run_episode(
    s: Scenario,
    params: Optional[Params] = None,
    noise: Optional[NoiseModel] = None,
    time_budget: Optional[float] = None,
    seed: Optional[int] = None,
    trial: int = 0,
) -> EpisodeResult:
    """Plan and execute until the goal holds or the time budget runs out."""
    real0 = time.perf_counter()
    params = params or s.params
    if params is not s.params:
        s = s.with_params(params)
    ex = params.execution
    pp = params.planner
    seed = s.seed if seed is None else int(seed)
    budget = ex.time_budget if time_budget is None else float(time_budget)
    if noise is None:
        noise = NoiseModel(ex.sigma_pos, ex.sigma_theta)
    noise.rng = stream(seed, trial, EXEC_STREAM)
    plan_rng = stream(seed, trial, PLAN_STREAM)
    transit_rng = stream(seed, trial, TRANSIT_STREAM)
    task = s.task
    arm = params.arm
    q = s.initial_state
    check_structure(q, s)

    clock = _Clock(ex)
    meter = Meter()
    traj: List[SegmentRecord] = []
    actions = 0
    transits = 0
    cycles = 0
    warnings = 0
    fallbacks = 0
    transit_failures = 0
    reason = ""

    def result(success):
        return EpisodeResult(
            success=success,
            wall_time=clock.total,
            planning_time=clock.planning,
            num_rearranging_actions=actions,
            num_segments=len(traj),
            num_transits=transits,
            trajectory=traj,
            seed=seed,
            trial=trial,
            failure_reason="" if success else reason,
            num_fallbacks=fallbacks,
            replanning_cycles=cycles,
            forest_warnings=warnings,
            final_state=q,
            elapsed_real=time.perf_counter() - real0,
        )

    if goal(q, task, arm):
        return result(True)

    def out_of_time():
        clock.charge_planning(meter)
        return clock.total >= budget

    def respawn(q):
        f = spawn_forest(pp.effective_n_tree, q, s, task, plan_rng, pp, meter, stop=out_of_time)
        thr = pp.progress_threshold
        if thr is None:
            thr = progress_threshold(q, task, pp.progress_fraction)
        c = ProgressContext(q, heuristic(q, task), thr, transit_rng, meter)
        clock.charge_planning(meter)
        return f, c

    forest, ctx = respawn(q)
    warnings += len(forest.warnings)
    while clock.total < budget:
        expand_forest(forest, s, task, pp, plan_rng, meter)
        try:
            pair = evaluate_progress(forest, ctx, task, pp, s)
        except ContractViolation:
            pair = None
        clock.charge_planning(meter)
        if pair is None:
            if forest.size >= pp.s_max and len(forest.unreachable) >= forest.n_trees:
                # every tree lost its transit: start over from the same state
                forest, ctx = respawn(q)
                warnings += len(forest.warnings)
            continue

        path = pair.transit
        if not _transit_ok(path, q, s):
            path = None
            for _ in range(ex.max_transit_failures + 1):
                if out_of_time():
                    break
                transit_failures += 1
                try:
                    path = generate_path(q.arm, pair.start_state.arm, q, s, rng=transit_rng, meter=meter)
                except ContractViolation:
                    path = None
                clock.charge_planning(meter)
                if path is not None or transit_failures > ex.max_transit_failures:
                    break
            if path is None:
                if out_of_time():
                    break
                if transit_failures > ex.max_transit_failures:
                    reason = "transit_failure"
                    return result(False)
                forest, ctx = respawn(q)
                continue

        exec_time = path.length() / params.transit.joint_speed + sum(v.duration for v, _, _ in pair.rearrange)
        if clock.total + exec_time > budget:
            break
        transit_failures = 0
        if not path.is_trivial:
            transits += 1
        t0 = clock.total + path.length() / params.transit.joint_speed
        start = q.with_arm(path.waypoints[-1])
        steps, why = _execute(start, [r[0] for r in pair.rearrange], s, noise, t0)
        if why:
            log.debug("segment aborted: %s", why)
        clock.charge_execution(path.length() / params.transit.joint_speed + sum(st.twist.duration for st in steps))
        q = steps[-1].observed if steps else start
        is_fallback = ctx.fallbacks > 0
        fallbacks += int(is_fallback)
        actions += len(steps)
        traj.append(SegmentRecord(pair, path, start, tuple(steps), q, is_fallback))
        if goal(q, task, arm):
            return result(True)
        cycles += 1
        forest, ctx = respawn(q)
        warnings += len(forest.warnings)

    reason = "budget"
    return result(False)
