"""Sort six discs into three regions with the forest planner.

Generates a seeded scene, plans and executes until the goal holds, checks
the executed solution independently and draws it.
"""
from kdrrf.bench import export_trajectory
from kdrrf.execution import run_episode
from kdrrf.feasibility import check_solution
from kdrrf.render import render_scene
from kdrrf.scenarios import generate_scenario

s = generate_scenario("sorting_regions", N=6, L=3, seed=4)
render_scene(s, "sorting_start.svg", state=s.initial_state)

res = run_episode(s, time_budget=120.0, seed=4)
print(res.summary())

# every push is replayed through the physics, every transit re-sampled
rep = check_solution(res.trajectory, s, res.final_state)
print("independent check:", "ok" if rep.ok else rep.problems)

for m, seg in enumerate(res.trajectory[:5]):
    kind = "fallback" if seg.fallback else "progress"
    print(f"segment {m}: transit {len(seg.transit.waypoints)} waypoints, {len(seg.steps)} pushes ({kind})")

render_scene(s, "sorting_solution.svg", trajectory=res.trajectory)
export_trajectory(res, "sorting_solution.jsonl")
print("wrote sorting_start.svg, sorting_solution.svg, sorting_solution.jsonl")
