"""Forest planner against the single-tree baseline on a few scenes.

The baseline is the same planner with one tree and no transit moves, so the
difference is only in where the search may restart from.  Ten trials per
planner take a few minutes; raise TRIALS for tighter numbers.
"""
from kdrrf.bench import run_benchmark, suite

TRIALS = 10

rep = run_benchmark(suite(kinds=["sorting_regions"]), planners=("kdrrf", "dhrrt"), trials=TRIALS, seed=0)
print(rep.table())

# per-trial view: both planners see the same scene for a given trial index
by_trial = {}
for r in rep.records:
    by_trial.setdefault(r.trial, {})[r.planner] = r
for t, rs in sorted(by_trial.items()):
    k, d = rs["kdrrf"], rs["dhrrt"]
    print(f"trial {t:2d}  kdrrf {'ok ' if k.success else 'no '} {k.actions:4d} actions   "
          f"dhrrt {'ok ' if d.success else 'no '} {d.actions:4d} actions")
