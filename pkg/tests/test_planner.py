import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from kdrrf.arm import fk
from kdrrf.geometry import Disc, Pose2, Rect
from kdrrf.params import ParamSet
from kdrrf.physics import Twist2, simulate, sweep_manifold_check
from kdrrf.planner import (
    Forest,
    ProgressContext,
    distance,
    evaluate_progress,
    expand_forest,
    object_selection_probabilities,
    sample_root,
    spawn_forest,
    stretched_probabilities,
)
from kdrrf.tasks import TaskSpec, goal, heuristic
from kdrrf.transit import exists_path, transit_config_free, validate_path
from kdrrf.world import ObjectState, Obstacle, SystemState, is_state_valid

from conftest import make_scenario
from oracles import linear_nearest


def rand_state(rng, n=3):
    arm = tuple(rng.uniform(-2.9, 2.9, 3))
    objs = tuple(
        ObjectState(Pose2(rng.uniform(-0.5, 0.5), rng.uniform(0.3, 0.9), rng.uniform(-math.pi, math.pi)), 0, 0)
        for _ in range(n)
    )
    return SystemState(arm, objs)


P = ParamSet()


class TestDistance:
    def test_identical_zero(self):
        q = rand_state(np.random.default_rng(0))
        assert distance(q, q, P) == 0.0

    def test_angle_wrap_counts_as_equal(self):
        q = rand_state(np.random.default_rng(1))
        o = q.objects[0]
        wrapped = ObjectState(Pose2(o.pose.x, o.pose.y, o.pose.theta + 2 * math.pi), 0, 0)
        q2 = SystemState(q.arm, (wrapped,) + q.objects[1:])
        assert distance(q, q2, P) == pytest.approx(0.0, abs=1e-12)

    def test_weights(self):
        a = SystemState((0.0, 0.0, 0.0), (ObjectState(Pose2(0, 0, 0), 0, 0),))
        b = SystemState((0.3, 0.4, 0.0), (ObjectState(Pose2(3, 4, 1.0), 0, 0),))
        assert distance(a, b, P) == pytest.approx(0.2 * 0.5 + 1.0 * 5 + 0.1 * 1.0)

    def test_symmetric_and_triangle(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            a, b, c = rand_state(rng), rand_state(rng), rand_state(rng)
            assert distance(a, b, P) == pytest.approx(distance(b, a, P), abs=1e-12)
            assert distance(a, c, P) <= distance(a, b, P) + distance(b, c, P) + 1e-12
            assert distance(a, b, P) > 0

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        f = Forest(3)
        for _ in range(50):
            f.add_root(rand_state(rng), 0.0)
        q = rand_state(rng)
        d = f.distances(q, P.distance_weights)
        ref = [distance(n.state, q, P) for n in f.nodes]
        assert np.allclose(d, ref, atol=1e-12)


class TestNearest:
    def _forest(self, rng):
        f = Forest(3, capacity=4)  # exercises regrowth
        for _ in range(int(rng.integers(1, 4))):
            f.add_root(rand_state(rng), 0.0)
        for _ in range(int(rng.integers(0, 60))):
            parent = f.nodes[int(rng.integers(0, f.size))]
            if rng.uniform() < 0.1:
                st_ = parent.state  # duplicate state: a tie
            else:
                st_ = rand_state(rng)
            f.add_node(parent, st_, Twist2(0, 0, 0), None, 0.0)
        return f

    def test_linear_scan_oracle_100_forests(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            f = self._forest(rng)
            for _ in range(5):
                q = rand_state(rng) if rng.uniform() < 0.8 else f.nodes[int(rng.integers(0, f.size))].state
                got = f.nearest(q, P.distance_weights)
                want = linear_nearest(f, q, P)
                assert got is want or distance(got.state, q, P) == distance(want.state, q, P) and got.index <= want.index

    def test_tie_goes_to_earliest(self):
        f = Forest(3)
        q = rand_state(np.random.default_rng(5))
        r = f.add_root(q, 0.0)
        f.add_node(r, q, Twist2(0, 0, 0), None, 0.0)
        assert f.nearest(q, P.distance_weights) is r

    def test_structure(self):
        rng = np.random.default_rng(6)
        f = self._forest(rng)
        assert f.size == sum(f.tree_sizes) == len(f.nodes)
        for n in f.nodes:
            chain = f.trace(n)
            assert chain[0].is_root and chain[0].tree_id == n.tree_id
            assert (n.parent is None) == (n.incoming_twist is None)


class TestRootSelection:
    def test_exp_and_power_formula(self):
        assert stretched_probabilities([0, 2], "exp") == pytest.approx([1 / (1 + math.e**2), math.e**2 / (1 + math.e**2)])
        assert stretched_probabilities([1, 2, 3], "power", 2) == pytest.approx(np.array([1, 4, 9]) / 14)
        assert stretched_probabilities([0, 0, 0], "power", 2) == pytest.approx([1 / 3] * 3)
        assert np.all(np.isfinite(stretched_probabilities([0, 1000.0], "exp")))

    def _scene(self, offsets):
        """Objects at reachable spots; class i's goal center sits ``offsets[i]`` below it."""
        xs = np.linspace(-0.3, 0.3, len(offsets))
        objs = tuple((float(x), 0.6, i) for i, x in enumerate(xs))
        regions = tuple(Rect(x - 0.05, 0.6 - d - 0.05, x + 0.05, 0.6 - d + 0.05) for x, d in zip(xs, offsets))
        return make_scenario(objects=objs, task=TaskSpec("sorting_regions", goal_regions=regions))

    def _draws(self, s, params, n, seed, monkeypatch):
        """Selection counts, read off the IK target so unreachable picks still count."""
        import kdrrf.planner as planner

        targets = []
        real_ik = planner.ik

        def spy(pose, *a, **kw):
            targets.append(pose)
            return real_ik(pose, *a, **kw)

        monkeypatch.setattr(planner, "ik", spy)
        rng = np.random.default_rng(seed)
        q = s.initial_state
        probs = object_selection_probabilities(q, s.task, params)
        misses = sum(sample_root(q, s.task, params, rng, s, probs) is None for _ in range(n))
        counts = np.zeros(s.num_objects)
        for e in targets:
            d = [math.hypot(e.x - o.pose.x, e.y - o.pose.y) for o in q.objects]
            counts[int(np.argmin(d))] += 1
        return counts, misses

    def test_uniform_chi_square(self, monkeypatch):
        s = self._scene([0.3, 0.5, 0.7, 0.9])
        params = replace(P, root_sampling="uniform")
        counts, misses = self._draws(s, params, 10_000, 7, monkeypatch)
        assert counts.sum() == 10_000 and misses < 10_000
        assert chisquare(counts).pvalue > 0.01

    def test_exp_stretch_tv(self, monkeypatch):
        s = self._scene([0.0, 1.0])  # gradient magnitudes (0, 2)
        params = replace(P, stretch="exp")
        want = np.array([1.0, math.e**2]) / (1.0 + math.e**2)
        assert object_selection_probabilities(s.initial_state, s.task, params) == pytest.approx(want)
        counts, _ = self._draws(s, params, 10_000, 8, monkeypatch)
        assert 0.5 * np.abs(counts / counts.sum() - want).sum() <= 0.02

    def test_power_stretch_tv(self, monkeypatch):
        s = self._scene([0.5, 1.0, 1.5])  # magnitudes (1, 2, 3)
        params = replace(P, stretch="power", stretch_power=2.0)
        want = np.array([1, 4, 9]) / 14
        counts, _ = self._draws(s, params, 10_000, 9, monkeypatch)
        assert 0.5 * np.abs(counts / counts.sum() - want).sum() <= 0.02

    def test_root_offset_and_facing(self):
        s = self._scene([0.3, 0.6])
        rng = np.random.default_rng(10)
        arm = s.params.arm
        reach = 0.035 + arm.ee_radius
        for _ in range(200):
            root = sample_root(s.initial_state, s.task, P, rng, s)
            if root is None:
                continue
            e = fk(root.arm, arm)
            d = [math.hypot(e.x - o.pose.x, e.y - o.pose.y) for o in s.initial_state.objects]
            i = int(np.argmin(d))
            o = s.initial_state.objects[i].pose
            assert 1.2 * reach - 1e-6 <= d[i] <= 2.0 * reach + 1e-6
            to_obj = math.atan2(o.y - e.y, o.x - e.x)
            off = abs(math.remainder(e.theta - to_obj, 2 * math.pi))
            assert off <= math.pi / 4 + 1e-6


class TestSpawn:
    def test_single_root_is_current_state(self):
        s = make_scenario()
        f = spawn_forest(1, s.initial_state, s, s.task, np.random.default_rng(0))
        assert f.n_trees == 1 and f.roots[0].state == s.initial_state

    def test_five_roots_open_workspace(self):
        s = make_scenario(objects=((-0.2, 0.55, 0), (0.0, 0.7, 0), (0.25, 0.5, 0)))
        q = s.initial_state
        f = spawn_forest(5, q, s, s.task, np.random.default_rng(1))
        assert f.n_trees == 5 and not f.warnings
        assert f.roots[0].state == q
        for r in f.roots[1:]:
            assert r.state.objects == q.objects and r.state.arm != q.arm
            assert transit_config_free(r.state.arm, q, s)
            assert exists_path(q.arm, r.state.arm, q, s, rng=np.random.default_rng(0))

    def test_obstructed_degrades_with_warning(self):
        # every pose near the object lies inside a large post
        s = make_scenario(objects=((0.0, 0.6, 0),), obstacles=(Obstacle(Disc(0.15), Pose2(0.0, 0.6)),))
        f = spawn_forest(3, s.initial_state, s, s.task, np.random.default_rng(2))
        assert f.n_trees == 1 and len(f.warnings) == 1


@pytest.fixture(scope="module")
def grown():
    s = make_scenario(objects=((-0.15, 0.5, 0), (0.05, 0.55, 1), (0.2, 0.6, 0)),
                      task=TaskSpec("sorting_regions", goal_regions=(Rect(-0.5, 0.7, -0.2, 0.9), Rect(0.2, 0.7, 0.5, 0.9))))
    rng = np.random.default_rng(3)
    p = s.params.planner
    f = spawn_forest(3, s.initial_state, s, s.task, rng, p)
    sizes = [f.size]
    for _ in range(150):
        expand_forest(f, s, s.task, p, rng)
        sizes.append(f.size)
    return s, f, sizes


class TestExpand:
    def test_grows_by_zero_or_one(self, grown):
        _, f, sizes = grown
        assert all(b - a in (0, 1) for a, b in zip(sizes, sizes[1:]))
        assert f.size > 50

    def test_edge_consistency(self, grown):
        s, f, _ = grown
        for n in f.nodes:
            if n.is_root:
                assert n.incoming_twist is None and n.incoming_joint_control is None
                continue
            sw = simulate(n.parent.state, n.incoming_twist, s)
            assert sw.state == n.state
            assert sw.control == n.incoming_joint_control
            assert n.h_value == heuristic(n.state, s.task)

    def test_manifold_containment(self, grown):
        s, f, _ = grown
        for n in f.nodes[::5]:
            if not n.is_root:
                assert sweep_manifold_check(n.parent.state, n.incoming_twist, s)
                assert is_state_valid(n.state, s)

    def test_single_control_used_iff_feasible(self):
        s = make_scenario()
        p = replace(s.params.planner, n_controls=1)
        for seed in range(10):
            f = spawn_forest(1, s.initial_state, s, s.task, np.random.default_rng(0), p)
            rng = np.random.default_rng(seed)
            node = expand_forest(f, s, s.task, p, rng)
            # replay the same draws to learn the sampled twist
            from kdrrf.planner import sample_state, sample_twist

            r2 = np.random.default_rng(seed)
            sample_state(s.initial_state, s, s.task, p, r2)
            v = sample_twist(p, r2)
            sw = simulate(s.initial_state, v, s)
            feasible = sw.state is not None and sw.in_manifold
            assert (node is not None) == feasible
            if node is not None:
                assert node.incoming_twist == v


def _ctx(s, q, threshold):
    return ProgressContext(q, heuristic(q, s.task), threshold, np.random.default_rng(0))


class TestEvaluateProgress:
    def _setup(self):
        region = Rect(0.1, 0.5, 0.4, 0.8)
        task = TaskSpec("relocating", target_object=0, relocate_region=region)
        s = make_scenario(objects=((0.0, 0.6, 0),), task=task)
        return s

    def _moved(self, q, x, y):
        o = q.objects[0]
        return SystemState(q.arm, (ObjectState(Pose2(x, y), o.shape_id, o.class_id),))

    def test_goal_node_extracted(self):
        s = self._setup()
        q = s.initial_state
        f = Forest(1)
        r = f.add_root(q, heuristic(q, s.task))
        a = f.add_node(r, self._moved(q, 0.05, 0.6), Twist2(0.1, 0, 0), None, 0.0)
        g = self._moved(q, 0.15, 0.6)
        f.add_node(a, g, Twist2(0.1, 0, 0), None, heuristic(g, s.task))
        pair = evaluate_progress(f, _ctx(s, q, 1e9), s.task, s.params.planner, s)
        assert pair is not None and len(pair.rearrange) == 2
        assert goal(pair.end_state, s.task)
        assert pair.transit.waypoints[-1] == pair.start_state.arm == q.arm

    def test_small_drop_keeps_expanding(self):
        s = self._setup()
        q = s.initial_state
        h0 = heuristic(q, s.task)
        f = Forest(1)
        r = f.add_root(q, h0)
        f.add_node(r, q, Twist2(0, 0, 0), None, h0 - 0.05)
        assert evaluate_progress(f, _ctx(s, q, 0.1), s.task, s.params.planner, s) is None

    def test_big_drop_extracted(self):
        s = self._setup()
        q = s.initial_state
        h0 = heuristic(q, s.task)
        f = Forest(1)
        r = f.add_root(q, h0)
        f.add_node(r, q, Twist2(0, 0, 0), None, h0 - 0.15)
        assert evaluate_progress(f, _ctx(s, q, 0.1), s.task, s.params.planner, s) is not None

    def test_size_limit_takes_best_leaf(self):
        s = self._setup()
        q = s.initial_state
        h0 = heuristic(q, s.task)
        p = replace(s.params.planner, s_max=6)
        f = Forest(1)
        r = f.add_root(q, h0)
        hs = [h0 - 0.01, h0 - 0.03, h0 - 0.02, h0 + 0.01, h0 - 0.005]
        nodes = [f.add_node(r, q, Twist2(0, 0, 0), None, h) for h in hs]
        ctx = _ctx(s, q, 0.1)
        pair = evaluate_progress(f, ctx, s.task, p, s)
        assert pair is not None and ctx.fallbacks == 1
        assert len(pair.rearrange) == 1 and pair.rearrange[0][2] is nodes[1].state

    def test_transit_to_other_root_is_valid(self):
        s = make_scenario(objects=((-0.2, 0.55, 0), (0.1, 0.6, 0)))
        q = s.initial_state
        f = spawn_forest(3, q, s, s.task, np.random.default_rng(11))
        assert f.n_trees == 3
        root = f.roots[2]
        f.add_node(root, root.state, Twist2(0, 0, 0), None, -1e9)
        pair = evaluate_progress(f, _ctx(s, q, 0.0), s.task, s.params.planner, s)
        assert pair is not None
        assert pair.transit.waypoints[0] == q.arm
        assert pair.transit.waypoints[-1] == root.state.arm == pair.start_state.arm
        assert validate_path(pair.transit, q, s, s.params.transit.resolution / 2)

    def test_dhrrt_is_single_tree_trivial_transit(self):
        p = replace(ParamSet(), algorithm="dhrrt", n_tree=7)
        assert p.effective_n_tree == 1


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=1, max_size=8), st.sampled_from(["exp", "power"]), st.floats(0.5, 4))
def test_property_probabilities_normalized(mags, stretch, k):
    p = stretched_probabilities(mags, stretch, k)
    assert np.all(p >= 0) and p.sum() == pytest.approx(1.0)
    if stretch == "power" and sum(mags) > 0:
        # order-preserving
        order = np.argsort(mags, kind="stable")
        assert np.all(np.diff(p[order]) >= -1e-12)
