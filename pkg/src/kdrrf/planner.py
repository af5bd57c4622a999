"""Forest of kinodynamic trees: spawning, expansion and progress evaluation.

A forest holds several trees that share one object arrangement but start
from different arm configurations.  Expansion picks the nearest node over
all trees; progress evaluation decides when a branch is worth executing and
pairs it with the transit that reaches its root.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .arm import JointControl, ik
from .geometry import Pose2, wrap_angle
from .params import ParamSet
from .physics import Twist2, simulate
from .tasks import TaskSpec, goal, gradient_magnitudes, heuristic, sample_goal_positions
from .transit import JointPath, Meter, exists_path, generate_path, transit_config_free
from .world import ContractViolation, Scenario, SystemState

log = logging.getLogger(__name__)

# IK is charged as this many collision checks on the virtual clock
IK_CHECK_EQUIVALENT = 20


@dataclass(eq=False)
class TreeNode:
    state: SystemState
    parent: Optional["TreeNode"]
    incoming_twist: Optional[Twist2]
    incoming_joint_control: Optional[JointControl]
    h_value: float
    tree_id: int
    index: int = -1
    n_children: int = 0

    @property
    def is_root(self) -> bool:
        return self.parent is None


@dataclass(frozen=True)
class MotionPair:
    """A transit to a tree root followed by the controls down to one node.

    ``rearrange`` holds ``(twist, joint control, predicted state)`` triples.
    """

    transit: JointPath
    rearrange: Tuple[Tuple[Twist2, JointControl, SystemState], ...]
    start_state: SystemState

    @property
    def end_state(self) -> SystemState:
        return self.rearrange[-1][2] if self.rearrange else self.start_state


class Forest:
    """Trees plus one global array index used for nearest-node queries."""

    def __init__(self, num_objects: int, capacity: int = 512):
        self.roots: List[TreeNode] = []
        self.nodes: List[TreeNode] = []
        self.tree_sizes: List[int] = []
        self.warnings: List[str] = []
        self.unreachable: set = set()
        self._n_obj = num_objects
        self._alloc(capacity)

    def _alloc(self, cap):
        n = self._n_obj
        arm = np.empty((cap, 3))
        xy = np.empty((cap, n, 2))
        th = np.empty((cap, n))
        if self.nodes:
            k = len(self.nodes)
            arm[:k], xy[:k], th[:k] = self._arm[:k], self._xy[:k], self._th[:k]
        self._arm, self._xy, self._th = arm, xy, th

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def n_trees(self) -> int:
        return len(self.roots)

    def _index(self, node: TreeNode):
        k = len(self.nodes)
        if k == self._arm.shape[0]:
            self._alloc(2 * k)
        node.index = k
        self._arm[k] = node.state.arm
        for i, o in enumerate(node.state.objects):
            self._xy[k, i, 0] = o.pose.x
            self._xy[k, i, 1] = o.pose.y
            self._th[k, i] = o.pose.theta
        self.nodes.append(node)

    def add_root(self, state: SystemState, h: float) -> TreeNode:
        node = TreeNode(state, None, None, None, h, len(self.roots))
        self._index(node)
        self.roots.append(node)
        self.tree_sizes.append(1)
        return node

    def add_node(self, parent: TreeNode, state: SystemState, twist: Twist2, control: JointControl, h: float) -> TreeNode:
        node = TreeNode(state, parent, twist, control, h, parent.tree_id)
        self._index(node)
        parent.n_children += 1
        self.tree_sizes[parent.tree_id] += 1
        return node

    def latest(self) -> TreeNode:
        return self.nodes[-1]

    def leaves(self) -> List[TreeNode]:
        return [n for n in self.nodes if n.n_children == 0]

    def distances(self, q: SystemState, weights: Sequence[float]) -> np.ndarray:
        """Vectorized :func:`distance` from every node to ``q``."""
        k = len(self.nodes)
        w_r, w_o, w_t = weights
        arm = np.asarray(q.arm)
        xy = np.array([(o.pose.x, o.pose.y) for o in q.objects]).reshape(-1, 2)
        th = np.array([o.pose.theta for o in q.objects])
        d_arm = np.sqrt(np.sum((self._arm[:k] - arm) ** 2, axis=1))
        d_xy = np.sqrt(np.sum((self._xy[:k] - xy) ** 2, axis=2)).sum(axis=1)
        dth = np.abs(np.remainder(self._th[:k] - th + math.pi, 2 * math.pi) - math.pi).sum(axis=1)
        return w_r * d_arm + w_o * d_xy + w_t * dth

    def nearest(self, q: SystemState, weights: Sequence[float]) -> TreeNode:
        """Closest node over all trees; ties go to the earliest inserted."""
        return self.nodes[int(np.argmin(self.distances(q, weights)))]

    def trace(self, node: TreeNode) -> List[TreeNode]:
        """Nodes from the tree root down to ``node`` (inclusive)."""
        out = []
        while node is not None:
            out.append(node)
            node = node.parent
        return out[::-1]


def distance(qa: SystemState, qb: SystemState, params: ParamSet) -> float:
    """Weighted joint-space, object-position and wrapped-angle distance."""
    w_r, w_o, w_t = params.distance_weights
    d_arm = math.sqrt(sum((a - b) ** 2 for a, b in zip(qa.arm, qb.arm)))
    d_xy = 0.0
    d_th = 0.0
    for oa, ob in zip(qa.objects, qb.objects):
        d_xy += math.hypot(oa.pose.x - ob.pose.x, oa.pose.y - ob.pose.y)
        d_th += abs(wrap_angle(oa.pose.theta - ob.pose.theta))
    return w_r * d_arm + w_o * d_xy + w_t * d_th


# ---------------------------------------------------------------------------
# root sampling


def object_selection_probabilities(q: SystemState, task: TaskSpec, params: ParamSet) -> np.ndarray:
    """Per-object selection probabilities for a new tree root.

    Uniform, or proportional to a stretched heuristic-gradient magnitude
    (``exp(|g|)`` or ``|g|**k``).  All-zero power weights fall back to uniform.
    """
    n = len(q.objects)
    if params.root_sampling == "uniform":
        return np.full(n, 1.0 / n)
    mags = gradient_magnitudes(q, task)
    return stretched_probabilities(mags, params.stretch, params.stretch_power)


def stretched_probabilities(mags: Sequence[float], stretch: str = "exp", k: float = 2.0) -> np.ndarray:
    mags = np.asarray(mags, dtype=float)
    if stretch == "exp":
        w = np.exp(mags - mags.max())  # shift keeps ratios, avoids overflow
    else:
        w = mags**k
    z = w.sum()
    if not np.isfinite(z) or z <= 0.0:
        return np.full(len(mags), 1.0 / len(mags))
    return w / z


def sample_root(
    q: SystemState,
    task: TaskSpec,
    params: ParamSet,
    rng: np.random.Generator,
    s: Scenario,
    probs: Optional[np.ndarray] = None,
) -> Optional[SystemState]:
    """Arm configuration placing the end-effector near a selected object.

    The offset is drawn from ``root_offset_range`` times the contact distance
    (object bounding radius plus end-effector radius) at a uniform bearing,
    with the end-effector facing the object within +-pi/4.
    """
    if probs is None:
        probs = object_selection_probabilities(q, task, params)
    i = int(rng.choice(len(probs), p=probs))
    o = q.objects[i]
    arm = s.params.arm
    reach = s.shapes[o.shape_id].bounding_radius + arm.ee_radius
    lo, hi = params.root_offset_range
    d = rng.uniform(lo, hi) * reach
    bearing = rng.uniform(-math.pi, math.pi)
    ex = o.pose.x + d * math.cos(bearing)
    ey = o.pose.y + d * math.sin(bearing)
    facing = bearing + math.pi + rng.uniform(-math.pi / 4, math.pi / 4)
    config = ik(Pose2(ex, ey, facing), arm, q.arm, rng=rng)
    if config is None:
        return None
    return q.with_arm(config)


def spawn_forest(
    n: int,
    q: SystemState,
    s: Scenario,
    task: TaskSpec,
    rng: np.random.Generator,
    params: Optional[ParamSet] = None,
    meter: Optional[Meter] = None,
    stop: Optional[Callable[[], bool]] = None,
) -> Forest:
    """Root 0 is ``q``; further roots share its objects with a new arm config.

    ``stop`` is polled before every root attempt; when it returns true the
    forest is returned with the roots found so far.
    """
    params = params or s.params.planner
    forest = Forest(len(q.objects), capacity=params.s_max + 8)
    forest.add_root(q, heuristic(q, task))
    if n <= 1:
        return forest
    if not transit_config_free(q.arm, q, s):
        msg = "current arm configuration touches an object; forest keeps 1 root"
        log.warning(msg)
        forest.warnings.append(msg)
        return forest
    probs = object_selection_probabilities(q, task, params)
    for slot in range(1, n):
        for _ in range(params.root_attempts):
            if stop is not None and stop():
                return forest
            if meter is not None:
                meter.checks += IK_CHECK_EQUIVALENT
            cand = sample_root(q, task, params, rng, s, probs)
            if cand is None:
                continue
            if not transit_config_free(cand.arm, q, s):
                continue
            sub = np.random.default_rng(rng.integers(2**63))
            if exists_path(q.arm, cand.arm, q, s, rng=sub, meter=meter):
                forest.add_root(cand, forest.roots[0].h_value)
                break
        else:
            msg = f"root slot {slot}: {params.root_attempts} samples failed; forest keeps {forest.n_trees} roots"
            log.warning(msg)
            forest.warnings.append(msg)
            return forest
    return forest


# ---------------------------------------------------------------------------
# expansion


def sample_state(q_ref: SystemState, s: Scenario, task: TaskSpec, params: ParamSet, rng: np.random.Generator) -> SystemState:
    """Random target state; goal-biased object positions with ``goal_bias``."""
    from .world import ObjectState

    ws = s.workspace
    if rng.uniform() < params.goal_bias:
        xy = sample_goal_positions(q_ref, task, ws, rng)
    else:
        xy = [(rng.uniform(ws.xmin, ws.xmax), rng.uniform(ws.ymin, ws.ymax)) for _ in q_ref.objects]
    objs = tuple(
        ObjectState(Pose2(float(x), float(y), float(rng.uniform(-math.pi, math.pi))), o.shape_id, o.class_id)
        for (x, y), o in zip(xy, q_ref.objects)
    )
    lims = s.params.arm.joint_limits
    arm = tuple(float(rng.uniform(lo, hi)) for lo, hi in lims)
    return SystemState(arm, objs)


def sample_twist(params: ParamSet, rng: np.random.Generator) -> Twist2:
    lin, ang = params.linear_speed, params.angular_speed
    vx, vy, om = rng.uniform(-lin, lin), rng.uniform(-lin, lin), rng.uniform(-ang, ang)
    return Twist2(float(vx), float(vy), float(om), params.control_duration)


def expand_forest(
    forest: Forest,
    s: Scenario,
    task: TaskSpec,
    params: ParamSet,
    rng: np.random.Generator,
    meter: Optional[Meter] = None,
) -> Optional[TreeNode]:
    """One expansion step; returns the added node or ``None``.

    Candidates whose sweep is infeasible (projection failure, jam) or leaves
    the valid set are discarded before the distance comparison.
    """
    q_rand = sample_state(forest.roots[0].state, s, task, params, rng)
    near = forest.nearest(q_rand, params.distance_weights)
    best = None
    best_d = math.inf
    for _ in range(params.n_controls):
        v = sample_twist(params, rng)
        sw = simulate(near.state, v, s)
        if meter is not None:
            meter.substeps += sw.substeps
        if sw.state is None or not sw.in_manifold:
            continue
        d = distance(sw.state, q_rand, params)
        if d < best_d:
            best, best_d = (v, sw), d
    if best is None:
        return None
    v, sw = best
    # sw.control is the per-substep J^+ projection of v from near.state.arm
    return forest.add_node(near, sw.state, v, sw.control, heuristic(sw.state, task))


# ---------------------------------------------------------------------------
# progress evaluation


@dataclass
class ProgressContext:
    """Per-cycle data for :func:`evaluate_progress`."""

    q_current: SystemState
    h_current: float
    threshold: float
    transit_rng: np.random.Generator
    meter: Optional[Meter] = None
    transits: Dict[int, Optional[JointPath]] = field(default_factory=dict)
    fallbacks: int = 0


def _transit_for(forest: Forest, tree_id: int, ctx: ProgressContext, s: Scenario) -> Optional[JointPath]:
    if tree_id not in ctx.transits:
        root = forest.roots[tree_id]
        if tuple(root.state.arm) == tuple(ctx.q_current.arm):
            # tree grown from where the arm already is
            ctx.transits[tree_id] = JointPath((tuple(root.state.arm),), s.params.transit.resolution)
        else:
            try:
                ctx.transits[tree_id] = generate_path(
                    ctx.q_current.arm, root.state.arm, ctx.q_current, s, rng=ctx.transit_rng, meter=ctx.meter
                )
            except ContractViolation:
                ctx.transits[tree_id] = None
    return ctx.transits[tree_id]


def extract(forest: Forest, node: TreeNode, transit: JointPath) -> MotionPair:
    chain = forest.trace(node)
    rearrange = tuple((n.incoming_twist, n.incoming_joint_control, n.state) for n in chain[1:])
    return MotionPair(transit, rearrange, chain[0].state)


def evaluate_progress(
    forest: Forest,
    ctx: ProgressContext,
    task: TaskSpec,
    params: ParamSet,
    s: Scenario,
) -> Optional[MotionPair]:
    """Return a motion pair to execute, or ``None`` to keep expanding."""
    latest = forest.latest()
    if not latest.is_root and latest.tree_id not in forest.unreachable:
        if ctx.h_current - latest.h_value > ctx.threshold or goal(latest.state, task, s.params.arm):
            path = _transit_for(forest, latest.tree_id, ctx, s)
            if path is not None:
                return extract(forest, latest, path)
            forest.unreachable.add(latest.tree_id)
    if forest.size >= params.s_max:
        leaves = [n for n in forest.leaves() if not n.is_root]
        leaves.sort(key=lambda n: (n.h_value, n.index))
        for leaf in leaves:
            if leaf.tree_id in forest.unreachable:
                continue
            path = _transit_for(forest, leaf.tree_id, ctx, s)
            if path is None:
                forest.unreachable.add(leaf.tree_id)
                continue
            ctx.fallbacks += 1
            return extract(forest, leaf, path)
    return None
