import json
import math
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from kdrrf.bench import (
    SuiteEntry,
    TrialRecord,
    aggregate,
    export_trajectory,
    read_trajectory,
    run_benchmark,
    suite,
    trajectory_records,
)
from kdrrf.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from kdrrf.execution import run_episode
from kdrrf.render import render_records, render_svg
from kdrrf.scenario_io import ScenarioFormatError, dumps, load, save, scenario_from_dict, scenario_to_dict
from kdrrf.scenarios import Knobs, PlacementError, generate_scenario
from kdrrf.world import is_state_valid

from conftest import make_scenario

TINY = (SuiteEntry("relocating", 2, 1, 3.0),)


class TestScenarios:
    def test_zero_objects_rejected(self):
        with pytest.raises(ValueError):
            generate_scenario("sorting_regions", 0, 3, 0)
        with pytest.raises(ValueError):
            generate_scenario("sorting_regions", 6, 0, 0)

    def test_1000_seeds_valid_and_not_solved(self):
        for seed in range(1000):
            s = generate_scenario("sorting_regions", 6, 3, seed)
            q = s.initial_state
            assert is_state_valid(q, s)
            for o in q.objects:
                r = s.goal_regions[o.class_id]
                assert not r.contains(o.pose.x, o.pose.y)

    def test_regenerable(self):
        a = generate_scenario("sorting_regions", 9, 3, 7)
        b = generate_scenario("sorting_regions", 9, 3, 7)
        assert a == b and dumps(a) == dumps(b)
        assert a != generate_scenario("sorting_regions", 9, 3, 8)

    def test_overpacked_names_the_knob(self):
        with pytest.raises(PlacementError, match="object_radius|gap|N"):
            generate_scenario("relocating", 200, 1, 0)

    @pytest.mark.parametrize("kind,L", [("grasping", 1), ("relocating", 1), ("sorting_free", 3), ("sorting_regions", 3)])
    def test_every_kind(self, kind, L):
        s = generate_scenario(kind, 6, L, 1)
        assert s.num_objects == 6 and is_state_valid(s.initial_state, s)
        assert sorted({o.class_id for o in s.initial_state.objects}) == list(range(L))

    def test_obstacles_knob(self):
        s = generate_scenario("relocating", 4, 1, 0, Knobs(n_obstacles=3))
        assert len(s.static_obstacles) == 3 and is_state_valid(s.initial_state, s)

    def test_suites(self):
        assert {e.kind for e in suite()} == {"grasping", "relocating", "sorting_free", "sorting_regions"}
        sr = suite(kinds=["sorting_regions"])[0]
        assert (sr.N, sr.L, sr.budget) == (6, 3, 120.0)
        assert suite(True, ["grasping"])[0].N == 36


class TestScenarioIO:
    def test_round_trip(self, tmp_path):
        s = generate_scenario("sorting_regions", 6, 3, 3, Knobs(n_obstacles=1, object_shape="box"))
        path = tmp_path / "s.json"
        save(s, path)
        assert load(path) == s
        assert scenario_from_dict(json.loads(dumps(s))) == s

    def test_bad_documents(self):
        d = scenario_to_dict(generate_scenario("relocating", 3, 1, 0))
        bad = json.loads(json.dumps(d))
        del bad["task"]
        with pytest.raises(ScenarioFormatError):
            scenario_from_dict(bad)
        bad = json.loads(json.dumps(d))
        bad["params"] = {"planner": {"no_such_knob": 1}}
        with pytest.raises(ScenarioFormatError):
            scenario_from_dict(bad)


@pytest.fixture(scope="module")
def tiny_reports():
    kw = dict(planners=("kdrrf", "dhrrt"), trials=3, seed=5)
    return run_benchmark(TINY, **kw), run_benchmark(TINY, **kw)


class TestReport:
    def test_byte_identical(self, tiny_reports):
        a, b = tiny_reports
        assert a.to_json() == b.to_json()

    def test_rows_recomputed_from_records(self, tiny_reports):
        rep, _ = tiny_reports
        assert aggregate(rep.records) == rep.rows
        for row in rep.rows:
            rs = [r for r in rep.records if r.planner == row.planner and r.task == row.task]
            ok = [r for r in rs if r.success]
            assert row.trials == len(rs) == 3 and row.successes == len(ok)
            if ok:
                t = [r.time for r in ok]
                mean = sum(t) / len(t)
                assert row.time_mean == pytest.approx(mean)
                assert row.time_std == pytest.approx(math.sqrt(sum((x - mean) ** 2 for x in t) / len(t)))
                assert row.actions_mean == pytest.approx(sum(r.actions for r in ok) / len(ok))

    def test_planners_share_scenarios(self, tiny_reports):
        rep, _ = tiny_reports
        by = {}
        for r in rep.records:
            by.setdefault(r.trial, set()).add(r.seed)
        assert all(len(v) == 1 for v in by.values())

    def test_table_and_json(self, tiny_reports):
        rep, _ = tiny_reports
        d = json.loads(rep.to_json())
        assert set(d) == {"version", "config", "rows", "records"}
        assert "kdrrf" in rep.table() and "+-" in rep.table() or "--" in rep.table()

    def test_aggregate_skips_failures_in_stats(self):
        recs = [
            TrialRecord("kdrrf", "relocating", 0, 0, True, 2.0, 1.0, 4, 1, 0, 0, 0),
            TrialRecord("kdrrf", "relocating", 1, 1, False, 9.0, 9.0, 99, 1, 0, 0, 0, "budget"),
            TrialRecord("kdrrf", "relocating", 2, 2, True, 4.0, 2.0, 6, 1, 0, 0, 0),
        ]
        (row,) = aggregate(recs)
        assert (row.successes, row.trials) == (2, 3)
        assert row.time_mean == 3.0 and row.time_std == 1.0 and row.actions_mean == 5.0

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            run_benchmark(TINY, trials=0)

    def test_crash_is_recorded_failure(self):
        # over-packed scene: generation raises inside the trial
        rep = run_benchmark((SuiteEntry("relocating", 200, 1, 1.0),), planners=("kdrrf",), trials=1)
        (r,) = rep.records
        assert not r.success and r.failure_reason.startswith("crash")


@pytest.fixture(scope="module")
def solved():
    s = make_scenario(objects=((0.0, 0.62, 0), (-0.3, 0.5, 0)))
    r = run_episode(s, time_budget=60.0, seed=3)
    assert r.success
    return s, r


class TestRender:
    def test_byte_identical(self, solved):
        s, r = solved
        assert render_svg(s, s.initial_state) == render_svg(s, s.initial_state)
        assert render_svg(s, trajectory=r.trajectory) == render_svg(s, trajectory=r.trajectory)

    def _classes(self, svg):
        root = ET.fromstring(svg)
        return [el.get("class") for el in root.iter() if el.get("class")]

    def test_empty_is_workspace_only(self):
        s = make_scenario(objects=((0.0, 0.6, 0),))
        cls = self._classes(render_svg(s))
        assert "workspace" in cls and "object" not in cls and "arm" not in cls

    def test_one_glyph_per_object(self):
        s = generate_scenario("sorting_regions", 6, 3, 2)
        cls = self._classes(render_svg(s, s.initial_state))
        assert cls.count("object") == 6 and cls.count("goal-region") == 3

    def test_trajectory_strokes(self, solved):
        s, r = solved
        cls = self._classes(render_svg(s, trajectory=r.trajectory))
        assert "push" in cls

    def test_export_round_trip(self, solved, tmp_path):
        s, r = solved
        path = tmp_path / "t.jsonl"
        export_trajectory(r, path)
        recs = read_trajectory(path)
        assert recs == json.loads(json.dumps(trajectory_records(r)))
        assert sum(x["kind"] == "push" for x in recs) == r.num_rearranging_actions
        svg = render_records(s, recs)
        assert self._classes(svg).count("object") == 2
        with pytest.raises(ValueError):
            render_records(s, [{"kind": "teleport", "segment": 0}])


def run_cli(argv):
    """Exit code of the CLI, whether returned or raised by argparse."""
    try:
        return main(argv)
    except SystemExit as e:
        return e.code


class TestCLI:
    def test_gen_stdout_and_file(self, tmp_path, capsys):
        assert main(["gen", "--task", "sorting_regions", "--seed", "4"]) == EXIT_OK
        out = capsys.readouterr().out
        assert scenario_from_dict(json.loads(out)) == generate_scenario("sorting_regions", 6, 3, 4)
        path = tmp_path / "s.json"
        assert main(["gen", "--task", "relocating", "-N", "2", "--out", str(path)]) == EXIT_OK
        assert load(path).num_objects == 2

    def test_plan_and_render(self, tmp_path, capsys):
        scen = tmp_path / "s.json"
        save(make_scenario(objects=((0.0, 0.62, 0), (-0.3, 0.5, 0))), scen)
        traj, svg = tmp_path / "t.jsonl", tmp_path / "t.svg"
        code = main(["plan", "--scenario", str(scen), "--seed", "3", "--budget", "60",
                     "--out", str(traj), "--render", str(svg)])
        assert code == EXIT_OK
        summary = json.loads(capsys.readouterr().out)
        assert summary["success"] and summary["feasible"]
        assert traj.exists() and svg.read_text().startswith("<svg")
        out = tmp_path / "r.svg"
        assert main(["render", "--scenario", str(scen), "--trajectory", str(traj), "--out", str(out)]) == EXIT_OK
        assert main(["render", "--scenario", str(scen), "--out", str(tmp_path / "init.svg")]) == EXIT_OK

    def test_bench(self, tmp_path, capsys):
        out = tmp_path / "rep.json"
        code = main(["bench", "--task", "relocating", "-N", "2", "--trials", "2", "--budget", "3",
                     "--planner", "kdrrf", "--seed", "5", "--out", str(out)])
        assert code == EXIT_OK
        assert "relocating" in capsys.readouterr().out
        assert len(json.loads(out.read_text())["records"]) == 2

    @pytest.mark.parametrize("argv", [
        [],
        ["frobnicate"],
        ["plan"],
        ["plan", "--task", "juggling"],
        ["plan", "--task", "relocating", "-N", "0"],
        ["bench", "--trials", "0"],
        ["bench", "--jobs", "0"],
        ["plan", "--task", "relocating", "--noise", "-1"],
        ["render", "--task", "relocating"],
        ["plan", "--scenario", "/no/such/file.json"],
    ])
    def test_usage_errors(self, argv, capsys):
        assert run_cli(argv) == EXIT_USAGE

    def test_unwritable_output_is_failure(self, tmp_path, capsys):
        code = main(["gen", "--task", "relocating", "--out", str(tmp_path / "missing" / "s.json")])
        assert code == EXIT_FAILURE

    def test_module_entry_point(self):
        out = subprocess.run([sys.executable, "-m", "kdrrf", "--version"], capture_output=True, text=True)
        assert out.returncode == 0 and out.stdout.strip()
