"""A single push, step by step.

Put the end-effector behind a disc, sweep it forward for half a second and
look at where everything ends up.
"""
import math

from kdrrf.arm import ArmSpec, fk, ik
from kdrrf.geometry import Disc, Pose2, Rect
from kdrrf.params import Params
from kdrrf.physics import Twist2, simulate
from kdrrf.render import render_scene
from kdrrf.tasks import TaskSpec
from kdrrf.world import ObjectState, Scenario, SystemState

# 1) a round-tipped arm (ee_width=0) so the push is the textbook disc-on-disc case
params = Params(arm=ArmSpec(ee_width=0.0))
arm = params.arm

# 2) one object 2 cm beyond contact, straight ahead of the tool
contact = 0.035 + arm.ee_radius
obj = ObjectState(Pose2(0.1, 0.45 + contact + 0.02), 0, 0)
start_arm = ik(Pose2(0.1, 0.45, math.pi / 2), arm, (0.3, 1.2, 0.5))
task = TaskSpec("relocating", target_object=0, relocate_region=Rect(0.0, 0.7, 0.2, 0.9))
s = Scenario(
    workspace=Rect(-0.5, 0.3, 0.5, 0.9),
    shapes=(Disc(0.035),),
    initial_state=SystemState(start_arm, (obj,)),
    task=task,
    num_classes=1,
    params=params,
)

# 3) push forward at 0.1 m/s for 0.5 s
v = Twist2(0.0, 0.1, 0.0, 0.5)
sw = simulate(s.initial_state, v, s, record=True)
print("feasible:", sw.state is not None, "substeps:", sw.substeps)

before, after = s.initial_state.objects[0].pose, sw.state.objects[0].pose
print(f"object moved {after.y - before.y:.4f} m (tool travel 0.05 m, gap 0.02 m)")
print("tool ends at", fk(sw.state.arm, arm))

# 4) the joint control that realizes the twist
for rates, dt in sw.control.joint_velocity_profile[:3]:
    print("  rates", [round(r, 4) for r in rates], "for", dt, "s")
print("  ...", len(sw.control.joint_velocity_profile), "segments")

render_scene(s, "push_before.svg")
render_scene(s, "push_after.svg", state=sw.state)
print("wrote push_before.svg, push_after.svg")
