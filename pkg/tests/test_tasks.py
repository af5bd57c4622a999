
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdrrf.arm import ArmSpec
from kdrrf.geometry import Pose2, Rect
from kdrrf.tasks import (
    TaskSpec,
    goal,
    gradient_check,
    heuristic,
    heuristic_gradient,
    numeric_gradient,
    progress_threshold,
)
from kdrrf.world import ObjectState, SystemState

HOME = (0.0, 1.9, 1.3)


def state(points, arm=HOME):
    """``points`` are (x, y, class) triples."""
    return SystemState(arm, tuple(ObjectState(Pose2(x, y), 0, c) for x, y, c in points))


def centered(cx, cy, half=0.1):
    return Rect(cx - half, cy - half, cx + half, cy + half)


REGIONS = (centered(-0.3, 0.8), centered(0.0, 0.8), centered(0.3, 0.8))
SORT = TaskSpec("sorting_regions", goal_regions=REGIONS)
RELOC = TaskSpec("relocating", target_object=0, relocate_region=Rect(0.2, 0.7, 0.4, 0.9))
GRASP = TaskSpec("grasping", target_object=0, clutter_radius=0.12)
FREE = TaskSpec("sorting_free", cluster_d_in=0.12, separation_d_out=0.3)
ALL = (SORT, RELOC, GRASP, FREE)


class TestSpecValidation:
    def test_missing_fields(self):
        with pytest.raises(ValueError):
            TaskSpec("sorting_regions")
        with pytest.raises(ValueError):
            TaskSpec("relocating", target_object=0)
        with pytest.raises(ValueError):
            TaskSpec("juggling")


class TestSortingRegions:
    def test_hand_evaluated(self):
        t = TaskSpec("sorting_regions", goal_regions=(centered(0.0, 0.0),))
        assert heuristic(state([(1, 2, 0)]), t) == pytest.approx(5.0)
        assert heuristic(state([(1, 0, 0), (0, 1, 0)]), t) == pytest.approx(2.0)
        assert heuristic(state([(0, 0, 0)]), t) == 0.0

    def test_goal_at_centers(self):
        q = state([(-0.3, 0.8, 0), (0.0, 0.8, 1), (0.3, 0.8, 2)])
        assert goal(q, SORT) == 1
        assert heuristic(q, SORT) == 0.0

    def test_goal_boundary(self):
        edge = REGIONS[0].xmax
        assert goal(state([(edge, 0.8, 0)]), SORT) == 1  # closed
        assert goal(state([(edge + 0.001, 0.8, 0)]), SORT) == 0

    def test_gradient_hand(self):
        t = TaskSpec("sorting_regions", goal_regions=(centered(0.0, 0.0),))
        assert heuristic_gradient(state([(1, 2, 0)]), t, 0) == pytest.approx((2.0, 4.0))
        assert numeric_gradient(state([(1, 2, 0)]), t, 0) == pytest.approx((2.0, 4.0), abs=1e-5)
        assert heuristic_gradient(state([(0, 0, 0)]), t, 0) == (0.0, 0.0)

    def test_zero_heuristic_implies_goal(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            cls = rng.integers(0, 3, size=5)
            q = state([(*REGIONS[c].center, int(c)) for c in cls])
            assert heuristic(q, SORT) == 0.0 and goal(q, SORT) == 1


class TestOtherKinds:
    def test_relocating(self):
        assert goal(state([(0.3, 0.8, 0), (0.0, 0.5, 0)]), RELOC) == 1
        q = state([(0.0, 0.5, 0)])
        assert goal(q, RELOC) == 0
        assert heuristic(q, RELOC) == pytest.approx(0.3**2 + 0.3**2)

    def test_grasping_lone_target(self):
        arm = ArmSpec()
        q = state([(0.0, 0.6, 0)])
        assert goal(q, GRASP, arm) == 1
        assert heuristic(q, GRASP) == 0.0

    def test_grasping_cluttered(self):
        q = state([(0.0, 0.6, 0), (0.05, 0.6, 0), (0.3, 0.6, 0)])
        assert goal(q, GRASP, ArmSpec()) == 0
        assert heuristic(q, GRASP) == pytest.approx((0.12 - 0.05) ** 2)

    def test_grasping_unreachable_target(self):
        arm = ArmSpec()
        q = state([(0.0, 1.5, 0)])  # beyond the 1.2 m reach
        assert goal(q, GRASP, arm) == 0

    def test_sorting_free(self):
        good = state([(-0.3, 0.5, 0), (-0.25, 0.5, 0), (0.2, 0.5, 1), (0.25, 0.55, 1)])
        assert goal(good, FREE) == 1
        spread = state([(-0.3, 0.5, 0), (-0.1, 0.5, 0), (0.2, 0.5, 1), (0.25, 0.55, 1)])
        assert goal(spread, FREE) == 0
        close = state([(-0.05, 0.5, 0), (-0.02, 0.5, 0), (0.02, 0.5, 1), (0.05, 0.5, 1)])
        assert goal(close, FREE) == 0
        assert heuristic(close, FREE) > heuristic(good, FREE) >= 0.0


def random_state(rng, n=6, L=3):
    pts = [(rng.uniform(-0.5, 0.5), rng.uniform(0.3, 0.9), int(rng.integers(0, L))) for _ in range(n)]
    return state(pts)


class TestGradients:
    @pytest.mark.parametrize("task", ALL, ids=lambda t: t.kind)
    def test_matches_fd_100_states(self, task):
        rng = np.random.default_rng(1)
        for _ in range(100):
            q = random_state(rng)
            assert gradient_check(q, task) <= 1e-5

    def test_fd_oracle_independent(self):
        # a hand-rolled central difference, not the library one
        rng = np.random.default_rng(2)
        h = 1e-6
        for task in ALL:
            q = random_state(rng)
            for i in range(len(q.objects)):
                g = heuristic_gradient(q, task, i)
                for axis in (0, 1):
                    def moved(d):
                        objs = list(q.objects)
                        p = objs[i].pose
                        xy = [p.x, p.y]
                        xy[axis] += d
                        objs[i] = ObjectState(Pose2(xy[0], xy[1], p.theta), 0, objs[i].class_id)
                        return heuristic(SystemState(q.arm, tuple(objs)), task)
                    fd = (moved(h) - moved(-h)) / (2 * h)
                    assert g[axis] == pytest.approx(fd, abs=1e-5)


class TestProperties:
    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.floats(-0.5, 0.5), st.floats(0.3, 0.9), st.integers(0, 2)), min_size=2, max_size=6))
    def test_nonnegative_and_pure(self, pts):
        q = state(pts)
        for t in ALL:
            h = heuristic(q, t)
            assert h >= 0.0 and h == heuristic(q, t)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.floats(-0.5, 0.5), st.floats(0.3, 0.9), st.integers(0, 2)), min_size=2, max_size=6),
           st.randoms(use_true_random=False))
    def test_goal_invariant_under_within_class_permutation(self, pts, rnd):
        q = state(pts)
        by_class = {}
        for p in pts:
            by_class.setdefault(p[2], []).append(p)
        shuffled = []
        for c in sorted(by_class):
            members = list(by_class[c])
            rnd.shuffle(members)
            shuffled += members
        q2 = state(shuffled)
        for t in (SORT, FREE):
            assert goal(q, t) == goal(q2, t)
            assert heuristic(q, t) == pytest.approx(heuristic(q2, t), abs=1e-12)


def test_progress_threshold():
    q = state([(0.0, 0.5, 0)])
    assert progress_threshold(q, RELOC) == pytest.approx(0.1 * heuristic(q, RELOC))
    fixed = TaskSpec("relocating", target_object=0, relocate_region=RELOC.relocate_region, progress_threshold=0.02)
    assert progress_threshold(q, fixed) == 0.02
