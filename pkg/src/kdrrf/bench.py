"""Batch benchmark runner, report aggregation and trajectory export."""

from __future__ import annotations

import json
import logging
import math
import subprocess
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .execution import EpisodeResult, NoiseModel, run_episode
from .params import Params
from .scenario_io import state_to_dict
from .scenarios import DESK, Knobs, generate_scenario

log = logging.getLogger(__name__)

PLANNERS = ("kdrrf", "dhrrt")


@dataclass(frozen=True)
class SuiteEntry:
    kind: str
    N: int
    L: int
    budget: float


DESK_SUITE = (
    SuiteEntry("grasping", 10, 1, 60.0),
    SuiteEntry("relocating", 10, 1, 60.0),
    SuiteEntry("sorting_free", 6, 3, 60.0),
    SuiteEntry("sorting_regions", 6, 3, 120.0),
)
PAPER_SUITE = (
    SuiteEntry("grasping", 36, 1, 180.0),
    SuiteEntry("relocating", 36, 1, 180.0),
    SuiteEntry("sorting_free", 9, 3, 300.0),
    SuiteEntry("sorting_regions", 9, 3, 300.0),
)


def suite(paper_scale: bool = False, kinds: Optional[Sequence[str]] = None) -> Tuple[SuiteEntry, ...]:
    entries = PAPER_SUITE if paper_scale else DESK_SUITE
    if kinds:
        entries = tuple(e for e in entries if e.kind in kinds)
    return entries


@dataclass(frozen=True)
class TrialRecord:
    planner: str
    task: str
    trial: int
    seed: int
    success: bool
    time: float
    planning_time: float
    actions: int
    segments: int
    transits: int
    fallbacks: int
    replanning_cycles: int
    failure_reason: str = ""


@dataclass(frozen=True)
class Row:
    planner: str
    task: str
    successes: int
    trials: int
    time_mean: float
    time_std: float
    actions_mean: float
    actions_std: float
    planning_time_mean: float


@dataclass
class BenchmarkReport:
    rows: List[Row]
    records: List[TrialRecord]
    config: Dict
    version: str

    def row(self, planner: str, task: str) -> Row:
        for r in self.rows:
            if r.planner == planner and r.task == task:
                return r
        raise KeyError((planner, task))

    def to_dict(self) -> Dict:
        return {
            "version": self.version,
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
            "records": [asdict(r) for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        head = ("planner", "task", "success", "time (s)", "actions")
        lines = []
        for r in self.rows:
            lines.append((
                r.planner,
                r.task,
                f"{r.successes}/{r.trials}",
                _pm(r.time_mean, r.time_std),
                _pm(r.actions_mean, r.actions_std),
            ))
        widths = [max(len(str(x)) for x in col) for col in zip(head, *lines)]
        fmt = "  ".join("{:<%d}" % w for w in widths)
        out = [fmt.format(*head), fmt.format(*("-" * w for w in widths))]
        out += [fmt.format(*ln) for ln in lines]
        return "\n".join(out)


def _pm(mean, std):
    if math.isnan(mean):
        return "--"
    return f"{mean:.1f} +- {std:.1f}"


def _stats(xs):
    if not xs:
        return math.nan, math.nan
    a = np.asarray(xs, dtype=float)
    return float(a.mean()), float(a.std())


def aggregate(records: Iterable[TrialRecord]) -> List[Row]:
    """Per (planner, task) rows; time and action stats use successes only."""
    groups: Dict[Tuple[str, str], List[TrialRecord]] = {}
    for r in sorted(records, key=lambda r: (r.task, r.planner, r.trial)):
        groups.setdefault((r.planner, r.task), []).append(r)
    rows = []
    for (planner, task), rs in groups.items():
        ok = [r for r in rs if r.success]
        tm, ts = _stats([r.time for r in ok])
        am, as_ = _stats([r.actions for r in ok])
        pm, _ = _stats([r.planning_time for r in ok])
        rows.append(Row(planner, task, len(ok), len(rs), tm, ts, am, as_, pm))
    order = {k: i for i, k in enumerate(("grasping", "relocating", "sorting_free", "sorting_regions"))}
    rows.sort(key=lambda r: (order.get(r.task, 99), PLANNERS.index(r.planner) if r.planner in PLANNERS else 9))
    return rows


def version_string() -> str:
    """``git describe`` of the source checkout, else the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=here, capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}-g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def trial_seed(seed: int, trial: int) -> int:
    return int(seed) * 1000 + int(trial)


def planner_params(planner: str, base: Optional[Params] = None, **planner_kw) -> Params:
    base = base or Params()
    return base.with_planner(algorithm=planner, **planner_kw)


@dataclass(frozen=True)
class _Job:
    entry: SuiteEntry
    planner: str
    trial: int
    seed: int
    params: Params
    knobs: Knobs
    noise: float


def _run_job(job: _Job) -> Tuple[TrialRecord, Optional[EpisodeResult]]:
    e = job.entry
    ts = trial_seed(job.seed, job.trial)
    try:
        s = generate_scenario(e.kind, e.N, e.L, ts, job.knobs, job.params)
        noise = NoiseModel(job.noise, 4.0 * job.noise)
        res = run_episode(s, noise=noise, time_budget=e.budget, seed=ts, trial=job.trial)
    except Exception as exc:  # an episode crash is a failed trial, not a failed batch
        log.exception("trial %s/%s/%d crashed", job.planner, e.kind, job.trial)
        rec = TrialRecord(job.planner, e.kind, job.trial, ts, False, math.nan, math.nan, 0, 0, 0, 0, 0,
                          f"crash: {type(exc).__name__}: {exc}")
        return rec, None
    rec = TrialRecord(
        job.planner, e.kind, job.trial, ts, res.success, res.wall_time, res.planning_time,
        res.num_rearranging_actions, res.num_segments, res.num_transits, res.num_fallbacks,
        res.replanning_cycles, res.failure_reason,
    )
    return rec, res


def run_benchmark(
    entries: Sequence[SuiteEntry],
    planners: Sequence[str] = PLANNERS,
    trials: int = 50,
    seed: int = 0,
    noise: float = 0.0,
    jobs: int = 1,
    params: Optional[Params] = None,
    knobs: Optional[Knobs] = None,
    planner_overrides: Optional[Dict[str, Dict]] = None,
    on_result: Optional[Callable[[TrialRecord, Optional[EpisodeResult]], None]] = None,
) -> BenchmarkReport:
    """Run ``trials`` episodes per (entry, planner) and aggregate.

    Both planners face the same scenario for a given trial index.
    ``planner_overrides`` maps a planner label to ParamSet overrides; labels
    other than ``kdrrf``/``dhrrt`` must set ``algorithm`` themselves.
    """
    if not entries or not planners or trials < 1:
        raise ValueError("run_benchmark needs entries, planners and trials >= 1")
    knobs = knobs or DESK
    overrides = planner_overrides or {}
    work = []
    for e in entries:
        for label in planners:
            kw = dict(overrides.get(label, {}))
            kw.setdefault("algorithm", label)
            p = (params or Params()).with_planner(**kw)
            for t in range(trials):
                work.append((label, _Job(e, label, t, seed, p, knobs, noise)))
    if jobs > 1:
        import multiprocessing as mp

        with mp.get_context("fork").Pool(jobs) as pool:
            outs = pool.map(_run_job, [j for _, j in work], chunksize=1)
    else:
        outs = [_run_job(j) for _, j in work]
    records = []
    for (label, _), (rec, res) in zip(work, outs):
        if rec.planner != label:
            rec = TrialRecord(**{**asdict(rec), "planner": label})
        records.append(rec)
        if on_result is not None:
            on_result(rec, res)
    records.sort(key=lambda r: (r.task, r.planner, r.trial))
    config = {
        "entries": [asdict(e) for e in entries],
        "planners": list(planners),
        "planner_overrides": overrides,
        "trials": trials,
        "seed": seed,
        "noise": noise,
        "knobs": asdict(knobs),
        "params": _params_echo(params or Params()),
    }
    return BenchmarkReport(aggregate(records), records, config, version_string())


def _params_echo(p: Params) -> Dict:
    from .scenario_io import _params_to

    return _params_to(p)


# ---------------------------------------------------------------------------
# trajectory export


def trajectory_records(result: EpisodeResult) -> List[Dict]:
    """One record per executed transit and push, in execution order."""
    out = []
    for m, seg in enumerate(result.trajectory):
        if not seg.transit.is_trivial:
            out.append({
                "kind": "transit",
                "segment": m,
                "waypoints": [list(w) for w in seg.transit.waypoints],
            })
        for k, (st, plan) in enumerate(zip(seg.steps, seg.pair.rearrange)):
            v = st.twist
            out.append({
                "kind": "push",
                "segment": m,
                "step": k,
                "t": st.t_end,
                "twist": [v.vx, v.vy, v.omega, v.duration],
                "predicted": state_to_dict(plan[2]),
                "observed": state_to_dict(st.observed),
            })
    return out


def export_trajectory(result: EpisodeResult, path) -> None:
    with open(path, "w") as fh:
        for rec in trajectory_records(result):
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_trajectory(path) -> List[Dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
