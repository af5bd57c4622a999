"""Independent re-check of an executed solution sequence.

A solution is a list of segments, each a transit followed by pushes.  The
checker replays every push through the physics and re-validates every
transit sample, without trusting anything the planner cached.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

from .physics import simulate
from .tasks import goal
from .transit import validate_path
from .world import Scenario, SystemState, is_state_valid, robot_valid

CONDITIONS = ("start", "goal", "transit", "rearrange", "continuity")


@dataclass
class FeasibilityReport:
    start: bool = True
    goal: bool = True
    transit: bool = True
    rearrange: bool = True
    continuity: bool = True
    problems: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(getattr(self, c) for c in CONDITIONS)

    def fail(self, cond: str, msg: str):
        setattr(self, cond, False)
        self.problems.append(f"{cond}: {msg}")


def check_solution(trajectory, s: Scenario, final_state: SystemState = None, resolution: float = None) -> FeasibilityReport:
    """Check start match, goal, transit validity, push validity and continuity.

    ``trajectory`` is an :class:`~kdrrf.execution.EpisodeResult` trajectory.
    Observed states at segment boundaries are the reference for continuity.
    """
    rep = FeasibilityReport()
    q0 = s.initial_state
    res = resolution or s.params.transit.resolution
    prev = q0
    if trajectory:
        first = trajectory[0]
        if first.transit.waypoints[0] != q0.arm or first.start.objects != q0.objects:
            rep.fail("start", "first segment does not begin at the initial state")
    for m, seg in enumerate(trajectory):
        wp = seg.transit.waypoints
        if wp[0] != prev.arm:
            rep.fail("continuity", f"segment {m} transit starts away from the previous arm config")
        if seg.start.objects != prev.objects or seg.start.arm != wp[-1]:
            rep.fail("continuity", f"segment {m} start differs from the transit end state")
        if len(wp) > 1 and not validate_path(seg.transit, prev, s, res):
            rep.fail("transit", f"segment {m} transit touches something")
        if len(wp) == 1 and not robot_valid(wp[0], s):
            rep.fail("transit", f"segment {m} trivial transit config invalid")
        q = seg.start
        for k, st in enumerate(seg.steps):
            sw = simulate(q, st.twist, s, record=True)
            if sw.state is None or sw.state != st.swept:
                rep.fail("rearrange", f"segment {m} step {k} does not replay")
            elif not all(is_state_valid(x, s) for x in sw.substates):
                rep.fail("rearrange", f"segment {m} step {k} passes through an invalid state")
            if not is_state_valid(st.observed, s):
                rep.fail("rearrange", f"segment {m} step {k} observation invalid")
            q = st.observed
        if q != seg.observed:
            rep.fail("continuity", f"segment {m} recorded end differs from the last observation")
        prev = seg.observed
    end = final_state if final_state is not None else prev
    if end != prev:
        rep.fail("continuity", "final state differs from the last segment end")
    if not goal(end, s.task, s.params.arm):
        rep.fail("goal", "final state does not satisfy the goal")
    return rep
