import math
from dataclasses import replace

import numpy as np
import pytest

from kdrrf.arm import ArmSpec
from kdrrf.geometry import Disc, Polygon, Pose2, Rect
from kdrrf.params import Params
from kdrrf.tasks import TaskSpec
from kdrrf.world import ObjectState, Scenario, SystemState

HOME = (0.0, 1.9, 1.3)
WORKSPACE = Rect(-0.5, 0.3, 0.5, 0.9)


def square(half):
    return Polygon(((-half, -half), (half, -half), (half, half), (-half, half)))


def make_scenario(
    objects=((0.0, 0.6, 0),),
    task=None,
    arm=None,
    obstacles=(),
    radius=0.035,
    shapes=None,
    num_classes=None,
    workspace=WORKSPACE,
    home=HOME,
    params=None,
):
    """Small hand-built scenario: ``objects`` are (x, y, class) or (x, y, theta, class, shape)."""
    params = params or Params()
    if arm is not None:
        params = replace(params, arm=arm)
    shapes = tuple(shapes) if shapes else (Disc(radius),)
    objs = []
    for o in objects:
        if len(o) == 3:
            x, y, c = o
            objs.append(ObjectState(Pose2(x, y, 0.0), 0, c))
        else:
            x, y, th, c, sid = o
            objs.append(ObjectState(Pose2(x, y, th), sid, c))
    L = num_classes or (max(o.class_id for o in objs) + 1 if objs else 1)
    if task is None:
        task = TaskSpec("relocating", target_object=0, relocate_region=Rect(0.2, 0.7, 0.4, 0.9))
    regions = task.goal_regions if task.kind == "sorting_regions" else None
    return Scenario(
        workspace=workspace,
        shapes=shapes,
        initial_state=SystemState(tuple(home), tuple(objs)),
        task=task,
        num_classes=L,
        static_obstacles=tuple(obstacles),
        goal_regions=regions,
        params=params,
    )


@pytest.fixture
def disc_arm():
    return ArmSpec(ee_width=0.0)


@pytest.fixture
def unit_arm():
    return ArmSpec(link_lengths=(1.0, 1.0, 1.0), base_pose=Pose2(0.0, 0.0, 0.0), joint_limits=((-math.pi, math.pi),) * 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
