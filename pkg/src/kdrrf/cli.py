"""Command-line front end: ``plan``, ``bench``, ``gen`` and ``render``.

Exit codes: 0 on success, 1 on a usage error (bad flags, unreadable or
malformed input), 2 when an episode or batch fails for infrastructure
reasons (a crash, an unwritable output).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from . import __version__
from .bench import PLANNERS, export_trajectory, read_trajectory, run_benchmark, suite
from .execution import NoiseModel, run_episode
from .feasibility import check_solution
from .render import render_records, render_scene
from .scenario_io import ScenarioFormatError, load, save, state_from_dict
from .scenarios import DESK, PAPER, PlacementError, generate_scenario
from .tasks import KINDS as TASK_KINDS

log = logging.getLogger("kdrrf")

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _size(kind: str, paper_scale: bool, N: Optional[int], L: Optional[int]):
    for e in suite(paper_scale):
        if e.kind == kind:
            return (N if N is not None else e.N), (L if L is not None else e.L), e.budget
    raise UsageError(f"unknown task kind {kind!r}")


def _scenario(args):
    if args.scenario:
        try:
            s = load(args.scenario)
        except (OSError, ScenarioFormatError, ValueError) as e:
            raise UsageError(f"cannot read scenario {args.scenario}: {e}") from None
        budget = s.params.execution.time_budget
    else:
        if not args.task:
            raise UsageError("need --scenario FILE or --task KIND")
        N, L, budget = _size(args.task, args.paper_scale, args.N, args.L)
        knobs = PAPER if args.paper_scale else DESK
        try:
            s = generate_scenario(args.task, N, L, args.seed, knobs)
        except (ValueError, PlacementError) as e:
            raise UsageError(str(e)) from None
    return s, budget


def _add_common(p, scenario=True):
    if scenario:
        p.add_argument("--scenario", metavar="FILE", help="scenario JSON file")
        p.add_argument("--task", choices=TASK_KINDS, help="generate a scenario of this kind")
        p.add_argument("-N", type=int, help="number of objects (default: suite size)")
        p.add_argument("-L", type=int, help="number of classes (default: suite size)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paper-scale", action="store_true", help="paper-sized scenes, budgets and trial counts")


def cmd_plan(args) -> int:
    s, budget = _scenario(args)
    if args.budget is not None:
        budget = args.budget
    params = s.params.with_planner(algorithm=args.planner)
    noise = NoiseModel(args.noise, 4.0 * args.noise)
    try:
        res = run_episode(s, params=params, noise=noise, time_budget=budget, seed=args.seed)
    except Exception:
        log.exception("episode crashed")
        return EXIT_FAILURE
    summary = res.summary()
    if res.success:
        rep = check_solution(res.trajectory, s.with_params(params), res.final_state)
        summary["feasible"] = rep.ok
        if not rep.ok:
            summary["problems"] = rep.problems
    print(json.dumps(summary, indent=2, sort_keys=True))
    try:
        if args.out:
            export_trajectory(res, args.out)
        if args.render:
            render_scene(s, args.render, trajectory=res.trajectory)
    except OSError as e:
        log.error("cannot write output: %s", e)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_bench(args) -> int:
    kinds = args.task or None
    entries = suite(args.paper_scale, kinds)
    if args.budget is not None:
        entries = tuple(replace(e, budget=args.budget) for e in entries)
    if args.N is not None or args.L is not None:
        entries = tuple(replace(e, N=args.N or e.N, L=args.L or e.L) for e in entries)
    trials = args.trials if args.trials is not None else (100 if args.paper_scale else 50)
    planners = [args.planner] if args.planner else list(PLANNERS)
    try:
        rep = run_benchmark(
            entries, planners=planners, trials=trials, seed=args.seed, noise=args.noise,
            jobs=args.jobs, knobs=PAPER if args.paper_scale else DESK,
        )
    except Exception:
        log.exception("benchmark failed")
        return EXIT_FAILURE
    print(rep.table())
    if args.out:
        try:
            Path(args.out).write_text(rep.to_json() + "\n")
        except OSError as e:
            log.error("cannot write report: %s", e)
            return EXIT_FAILURE
    return EXIT_OK


def cmd_gen(args) -> int:
    s, _ = _scenario(args)
    if args.out:
        try:
            save(s, args.out)
        except OSError as e:
            log.error("cannot write scenario: %s", e)
            return EXIT_FAILURE
    else:
        from .scenario_io import dumps

        print(dumps(s))
    return EXIT_OK


def cmd_render(args) -> int:
    s, _ = _scenario(args)
    if not args.out:
        raise UsageError("render needs --out PATH")
    try:
        if args.trajectory:
            svg = render_records(s, read_trajectory(args.trajectory))
        elif args.state:
            svg = None
            state = state_from_dict(json.loads(Path(args.state).read_text()))
        else:
            svg = None
            state = s.initial_state
    except (OSError, ValueError, KeyError) as e:
        raise UsageError(f"cannot read input: {e}") from None
    try:
        if svg is not None:
            Path(args.out).write_text(svg)
        else:
            render_scene(s, args.out, state=state)
    except OSError as e:
        log.error("cannot write %s: %s", args.out, e)
        return EXIT_FAILURE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="kdrrf", description="Nonprehensile rearrangement planning with kdRRF.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="run one episode")
    _add_common(p)
    p.add_argument("--planner", choices=PLANNERS, default="kdrrf")
    p.add_argument("--budget", type=float, metavar="SECONDS")
    p.add_argument("--noise", type=float, default=0.0, metavar="SIGMA", help="position noise std (m)")
    p.add_argument("--out", metavar="PATH", help="trajectory JSONL output")
    p.add_argument("--render", metavar="SVG", help="also render the executed trajectory")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench", help="run the benchmark suite")
    p.add_argument("--task", choices=TASK_KINDS, action="append", help="restrict to a task (repeatable)")
    p.add_argument("-N", type=int)
    p.add_argument("-L", type=int)
    _add_common(p, scenario=False)
    p.add_argument("--planner", choices=PLANNERS, help="only this planner (default: both)")
    p.add_argument("--trials", type=int)
    p.add_argument("--budget", type=float, metavar="SECONDS", help="override every suite budget")
    p.add_argument("--noise", type=float, default=0.0, metavar="SIGMA")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", metavar="PATH", help="JSON report output")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="generate a scenario file")
    _add_common(p)
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("render", help="render a scenario, state or trajectory to SVG")
    _add_common(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--trajectory", metavar="JSONL", help="trajectory written by 'plan --out'")
    g.add_argument("--state", metavar="JSON", help="state as written in trajectory records")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_render)
    return ap


def _check(args):
    for name in ("trials", "jobs"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            raise UsageError(f"--{name} must be >= 1")
    for name in ("noise", "budget"):
        v = getattr(args, name, None)
        if v is not None and v < 0:
            raise UsageError(f"--{name} must be >= 0")
    for name in ("N", "L"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            raise UsageError(f"-{name} must be >= 1")


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        _check(args)
        return args.func(args)
    except UsageError as e:
        print(f"kdrrf: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
