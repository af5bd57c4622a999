"""JSON scenario files.

Top-level keys: ``workspace``, ``shapes``, ``obstacles``, ``initial_state``,
``num_classes``, ``goal_regions``, ``task``, ``params``, ``noise_sigma`` and
``seed``.  Every ``params`` section is optional and overrides defaults
field by field.
"""

from __future__ import annotations

import json
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any, Dict, Union

from .arm import ArmSpec
from .geometry import Disc, Polygon, Pose2, Rect
from .params import ExecutionParams, ParamSet, Params, PhysicsParams, TransitParams
from .tasks import TaskSpec
from .world import ObjectState, Obstacle, Scenario, SystemState

FORMAT_VERSION = 1


class ScenarioFormatError(ValueError):
    pass


def _rect(r: Rect):
    return list(r.as_tuple())


def _shape_to(sh):
    if isinstance(sh, Disc):
        return {"type": "disc", "radius": sh.radius}
    return {"type": "polygon", "vertices": [list(v) for v in sh.vertices]}


def _shape_from(d):
    kind = d.get("type")
    if kind == "disc":
        return Disc(float(d["radius"]))
    if kind == "polygon":
        return Polygon(tuple((float(x), float(y)) for x, y in d["vertices"]))
    raise ScenarioFormatError(f"unknown shape type {kind!r}")


def _params_to(p: Params) -> Dict[str, Any]:
    arm = asdict(p.arm)
    arm["base_pose"] = list(p.arm.base_pose.as_tuple())
    return {
        "planner": asdict(p.planner),
        "physics": asdict(p.physics),
        "arm": arm,
        "transit": asdict(p.transit),
        "execution": asdict(p.execution),
    }


def _build(cls, d: Dict[str, Any], section: str):
    known = {f.name for f in fields(cls)}
    extra = set(d) - known
    if extra:
        raise ScenarioFormatError(f"unknown keys in params.{section}: {sorted(extra)}")
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    return cls(**kw)


def _params_from(d: Dict[str, Any]) -> Params:
    extra = set(d) - {"planner", "physics", "arm", "transit", "execution"}
    if extra:
        raise ScenarioFormatError(f"unknown params sections {sorted(extra)}")
    arm = dict(d.get("arm", {}))
    if "base_pose" in arm:
        arm["base_pose"] = Pose2(*arm["base_pose"])
    if "joint_limits" in arm:
        arm["joint_limits"] = tuple(tuple(x) for x in arm["joint_limits"])
    return Params(
        planner=_build(ParamSet, d.get("planner", {}), "planner"),
        physics=_build(PhysicsParams, d.get("physics", {}), "physics"),
        arm=_build(ArmSpec, arm, "arm"),
        transit=_build(TransitParams, d.get("transit", {}), "transit"),
        execution=_build(ExecutionParams, d.get("execution", {}), "execution"),
    )


def _task_to(t: TaskSpec):
    out = {"kind": t.kind}
    for f in fields(TaskSpec):
        v = getattr(t, f.name)
        if f.name == "kind" or v is None:
            continue
        if isinstance(v, Rect):
            v = _rect(v)
        elif f.name == "goal_regions":
            v = [_rect(r) for r in v]
        out[f.name] = v
    return out


def _task_from(d):
    kw = dict(d)
    if "relocate_region" in kw:
        kw["relocate_region"] = Rect(*kw["relocate_region"])
    if "goal_regions" in kw:
        kw["goal_regions"] = tuple(Rect(*r) for r in kw["goal_regions"])
    try:
        return TaskSpec(**kw)
    except TypeError as e:
        raise ScenarioFormatError(f"bad task: {e}") from None


def state_to_dict(q: SystemState):
    return {
        "arm": list(q.arm),
        "objects": [
            {"pose": list(o.pose.as_tuple()), "shape": o.shape_id, "class": o.class_id} for o in q.objects
        ],
    }


def state_from_dict(d) -> SystemState:
    objs = tuple(ObjectState(Pose2(*o["pose"]), int(o["shape"]), int(o.get("class", 0))) for o in d["objects"])
    return SystemState(tuple(float(a) for a in d["arm"]), objs)


def scenario_to_dict(s: Scenario) -> Dict[str, Any]:
    return {
        "format": FORMAT_VERSION,
        "workspace": _rect(s.workspace),
        "shapes": [_shape_to(sh) for sh in s.shapes],
        "obstacles": [{"shape": _shape_to(o.shape), "pose": list(o.pose.as_tuple())} for o in s.static_obstacles],
        "initial_state": state_to_dict(s.initial_state),
        "num_classes": s.num_classes,
        "goal_regions": None if s.goal_regions is None else [_rect(r) for r in s.goal_regions],
        "task": _task_to(s.task),
        "params": _params_to(s.params),
        "noise_sigma": s.noise_sigma,
        "seed": s.seed,
    }


def scenario_from_dict(d: Dict[str, Any]) -> Scenario:
    try:
        regions = d.get("goal_regions")
        return Scenario(
            workspace=Rect(*d["workspace"]),
            shapes=tuple(_shape_from(x) for x in d["shapes"]),
            initial_state=state_from_dict(d["initial_state"]),
            task=_task_from(d["task"]),
            num_classes=int(d.get("num_classes", 1)),
            static_obstacles=tuple(
                Obstacle(_shape_from(o["shape"]), Pose2(*o["pose"])) for o in d.get("obstacles", [])
            ),
            goal_regions=None if regions is None else tuple(Rect(*r) for r in regions),
            params=_params_from(d.get("params", {})),
            noise_sigma=float(d.get("noise_sigma", 0.0)),
            seed=int(d.get("seed", 0)),
        )
    except KeyError as e:
        raise ScenarioFormatError(f"missing key {e}") from None


def dumps(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2, sort_keys=True)


def save(s: Scenario, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps(s) + "\n")


def load(path: Union[str, Path]) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ScenarioFormatError(f"{path}: {e}") from None
    return scenario_from_dict(data)
