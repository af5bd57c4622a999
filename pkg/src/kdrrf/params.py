"""Parameter records shared by the simulator, planners and episode runner."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Optional, Tuple

from .arm import ArmSpec


@dataclass(frozen=True)
class PhysicsParams:
    substep_dt: float = 0.05
    max_resolve_iters: int = 32
    contact_tolerance: float = 1e-4
    rotation_coupling: float = 0.5

    def __post_init__(self):
        if self.substep_dt <= 0 or self.max_resolve_iters < 1 or self.contact_tolerance <= 0:
            raise ValueError(f"invalid physics parameters {self}")
        if not 0.0 <= self.rotation_coupling <= 1.0:
            raise ValueError("rotation_coupling must lie in [0, 1]")


@dataclass(frozen=True)
class ParamSet:
    """Forest planner parameters.

    ``algorithm='dhrrt'`` pins a single tree rooted at the current state, so
    every transit is the trivial single-waypoint path.
    ``progress_threshold=None`` means ``progress_fraction`` of the heuristic
    at each forest respawn.
    """

    algorithm: str = "kdrrf"
    n_tree: int = 3
    n_controls: int = 5
    progress_threshold: Optional[float] = None
    progress_fraction: float = 0.1
    s_max: int = 300
    root_sampling: str = "task_oriented"
    stretch: str = "power"
    stretch_power: float = 2.0
    goal_bias: float = 0.1
    distance_weights: Tuple[float, float, float] = (0.2, 1.0, 0.1)
    root_offset_range: Tuple[float, float] = (1.2, 2.0)
    root_attempts: int = 50
    linear_speed: float = 0.2
    angular_speed: float = 1.0
    control_duration: float = 0.5

    def __post_init__(self):
        if self.algorithm not in ("kdrrf", "dhrrt"):
            raise ValueError(f"unknown planner {self.algorithm!r}")
        if self.root_sampling not in ("uniform", "task_oriented"):
            raise ValueError(f"unknown root sampling {self.root_sampling!r}")
        if self.stretch not in ("exp", "power"):
            raise ValueError(f"unknown stretch {self.stretch!r}")
        if self.n_tree < 1 or self.n_controls < 1 or self.s_max < 1 or self.root_attempts < 1:
            raise ValueError("n_tree, n_controls, s_max and root_attempts must be >= 1")
        if not 0.0 <= self.goal_bias < 1.0:
            raise ValueError("goal_bias must lie in [0, 1)")
        lo, hi = self.root_offset_range
        if not 0 < lo <= hi:
            raise ValueError("root_offset_range needs 0 < min <= max")
        object.__setattr__(self, "distance_weights", tuple(map(float, self.distance_weights)))
        object.__setattr__(self, "root_offset_range", (float(lo), float(hi)))

    @property
    def effective_n_tree(self) -> int:
        return 1 if self.algorithm == "dhrrt" else self.n_tree


@dataclass(frozen=True)
class TransitParams:
    step: float = 0.1
    resolution: float = 0.02
    budget: int = 5000
    exists_budget: int = 2000
    shortcut_attempts: int = 100
    joint_speed: float = 3.0  # execution speed for transit timing, rad/s


@dataclass(frozen=True)
class ExecutionParams:
    """Episode budget, noise and the deterministic time model.

    With ``clock='virtual'`` planning time is charged per unit of work
    (one physics substep, one transit collision check), which makes episodes
    bit-reproducible; ``clock='wall'`` uses the process clock instead.
    """

    time_budget: float = 120.0
    sigma_pos: float = 0.0
    sigma_theta: float = 0.0
    clock: str = "virtual"
    substep_cost: float = 1.5e-5
    check_cost: float = 6.0e-5
    max_transit_failures: int = 5

    def __post_init__(self):
        if self.clock not in ("virtual", "wall"):
            raise ValueError(f"unknown clock {self.clock!r}")
        if self.sigma_pos < 0 or self.sigma_theta < 0:
            raise ValueError("noise sigmas must be non-negative")


@dataclass(frozen=True)
class Params:
    planner: ParamSet = field(default_factory=ParamSet)
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    arm: ArmSpec = field(default_factory=ArmSpec)
    transit: TransitParams = field(default_factory=TransitParams)
    execution: ExecutionParams = field(default_factory=ExecutionParams)

    def with_planner(self, **kw) -> "Params":
        return replace(self, planner=replace(self.planner, **kw))

    def with_execution(self, **kw) -> "Params":
        return replace(self, execution=replace(self.execution, **kw))


def field_names(cls) -> Tuple[str, ...]:
    return tuple(f.name for f in fields(cls))
