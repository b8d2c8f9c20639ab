import csv
import io
import json
import sys
from pathlib import Path

import pytest

from hetmap.appgraph import AppGraph, NodeKind, TaskAttrs, chain_graph
from hetmap.evaluator import Timeline, evaluate
from hetmap.platform import preset
from hetmap.timing import TimingModel
from hetmap.workbench import ExperimentConfig, render_dot, render_gantt, run_experiment
from hetmap.workbench.cli import main
from hetmap.workbench.experiment import CSV_COLUMNS, pct_change, same_device_fraction
from hetmap.workbench.io import all_cpu_mapping, load_platform

from conftest import random_instance


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def small_graph(tmp_path):
    g, _, _ = random_instance(3, max_tasks=4)
    path = tmp_path / "g.json"
    path.write_text(json.dumps(g.to_dict()))
    return path


class TestCli:
    def test_gen_deterministic(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run(["gen", "--edges", 30, "--count", 1, "--seed", 7, "-o", a], capsys)[0] == 0
        assert run(["gen", "--edges", 30, "--count", 1, "--seed", 7, "-o", b], capsys)[0] == 0
        assert a.read_bytes() == b.read_bytes()
        assert AppGraph.from_dict(json.loads(a.read_text())).nodes

    def test_gen_many(self, tmp_path, capsys):
        path = tmp_path / "many.json"
        run(["gen", "--edges", 10, "--count", 3, "-o", path], capsys)
        assert len(json.loads(path.read_text())) == 3

    def test_eval_all_cpu(self, small_graph, tmp_path, capsys):
        tl, svg = tmp_path / "tl.json", tmp_path / "g.svg"
        code, out, _ = run(["eval", small_graph, "--platform", "CG", "--mapping", "all-cpu",
                            "--timeline", tl, "--gantt", svg], capsys)
        assert code == 0
        value = float(out.split()[1])
        assert 0 < value < float("inf")
        assert Timeline.from_dict(json.loads(tl.read_text())).makespan == value
        assert svg.read_text().startswith("<svg")

    def test_solve_not_worse_than_baseline(self, small_graph, tmp_path, capsys):
        _, out, _ = run(["eval", small_graph, "--pin-io"], capsys)
        base = float(out.split()[1])
        res = tmp_path / "sol.json"
        code, out, _ = run(["solve", small_graph, "--platform", "CG", "--formulation", "time",
                            "--mode", "exhaustive", "--pin-io", "-o", res], capsys)
        assert code == 0
        data = json.loads(res.read_text())
        assert data["objective_s"] <= base + 1e-12
        assert data["status"] == "Optimal"
        code, out, _ = run(["eval", small_graph, "--pin-io", "--mapping", res], capsys)
        assert code == 0 and float(out.split()[1]) == pytest.approx(data["makespan_s"])

    def test_solve_external_env(self, small_graph, tmp_path, capsys, monkeypatch):
        script = tmp_path / "ext.py"
        script.write_text("import sys\n"
                          "from hetmap.solver import read_lp, solve_highs, write_solution\n"
                          "m = read_lp(sys.argv[1])\n"
                          "s = solve_highs(m)\n"
                          "write_solution(m, s.values, sys.argv[2])\n")
        monkeypatch.setenv("HETMAP_EXTERNAL_SOLVER", f"{sys.executable} {script} {{lp}} {{sol}}")
        code, out, _ = run(["solve", small_graph, "--mode", "external", "--pin-io"], capsys)
        assert code == 0 and "status Feasible" in out

    def test_export_lp(self, small_graph, tmp_path, capsys):
        lp = tmp_path / "m.lp"
        assert run(["export-lp", small_graph, "--formulation", "device", "-o", lp], capsys)[0] == 0
        text = lp.read_text()
        assert text.startswith("\\") and "Subject To" in text and text.rstrip().endswith("End")

    def test_render(self, small_graph, tmp_path, capsys):
        dot = tmp_path / "g.dot"
        assert run(["render", small_graph, "--mapping", "all-cpu", "-o", dot], capsys)[0] == 0
        assert dot.read_text().startswith("digraph")
        tl = tmp_path / "tl.json"
        run(["eval", small_graph, "--timeline", tl], capsys)
        code, out, _ = run(["render", "--timeline", tl], capsys)
        assert code == 0 and out.startswith("<svg")

    def test_usage_errors(self, capsys):
        assert run([], capsys)[0] == 1
        assert run(["frobnicate"], capsys)[0] == 1
        assert run(["gen"], capsys)[0] == 1
        assert run(["render"], capsys)[0] == 1

    def test_data_errors(self, tmp_path, small_graph, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run(["eval", bad], capsys)[0] == 2
        assert run(["eval", tmp_path / "missing.json"], capsys)[0] == 2
        assert run(["eval", small_graph, "--platform", "NOPE"], capsys)[0] == 2
        assert run(["eval", small_graph, "--index", 4], capsys)[0] == 2
        bad_map = tmp_path / "map.json"
        bad_map.write_text(json.dumps({"0": "GPU"}))
        assert run(["eval", small_graph, "--mapping", bad_map], capsys)[0] == 2

    def test_infeasible_exit(self, tmp_path, capsys):
        big = tmp_path / "big.json"
        run(["gen", "--edges", 30, "--seed", 1, "-o", big], capsys)
        code, _, err = run(["solve", big, "--mode", "exhaustive", "--budget", 10], capsys)
        assert code == 3 and "budget" in err

    def test_experiment_reports(self, tmp_path, capsys):
        csv_path, json_path = tmp_path / "r.csv", tmp_path / "r.json"
        argv = ["experiment", "--edges", 6, "--count", 3, "--formulations", "device,time",
                "--no-times", "--csv", csv_path, "--json", json_path]
        assert run(argv, capsys)[0] == 0
        first = (csv_path.read_bytes(), json_path.read_bytes())
        assert run(argv, capsys)[0] == 0
        assert (csv_path.read_bytes(), json_path.read_bytes()) == first
        rows = list(csv.DictReader(io.StringIO(csv_path.read_text())))
        assert len(rows) == 6 and list(rows[0]) == CSV_COLUMNS
        data = json.loads(json_path.read_text())
        assert set(data["aggregates"]) == {"device", "time"}

    def test_experiment_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"edges": 5, "colour": "blue"}))
        assert run(["experiment", "--config", cfg], capsys)[0] == 2


def slow_gpu_platform(path: Path) -> Path:
    data = preset("CG").to_dict()
    for p in data["proc_units"]:
        if p["id"] == "GPU":
            p["clock"] = 1.0
            p["cores"] = 1
    path.write_text(json.dumps(data))
    return path


class TestExperiment:
    def test_all_cpu_optimum_gives_zero(self, tmp_path):
        plat = slow_gpu_platform(tmp_path / "p.json")
        cfg = ExperimentConfig(platform=str(plat), edges=6, count=1, mode="exhaustive",
                               formulations=["device", "time"], record_times=False)
        report = run_experiment(cfg)
        for agg in report.aggregates.values():
            assert agg["improved"] == 0 and agg["avg_pct"] == 0.0

    def test_workers_same_result(self):
        base = dict(edges=8, count=4, formulations=["time"], record_times=False)
        a = run_experiment(ExperimentConfig(**base))
        b = run_experiment(ExperimentConfig(**base, workers=2))
        da, db = a.to_dict(), b.to_dict()
        da.pop("config"), db.pop("config")
        assert da == db

    def test_pct_change(self):
        assert pct_change(2.0, 1.0) == 50.0
        assert pct_change(1.0, 1.5) == -50.0

    def test_same_device_fraction(self, cg):
        g = chain_graph([TaskAttrs(0.5, 1.0)] * 3)
        m = all_cpu_mapping(g, cg)
        assert same_device_fraction(g, m) == 1.0
        c = g.of_kind(NodeKind.COMPUTE)[1]
        m[c] = "GPU"
        assert same_device_fraction(g, m) == 0.0
        assert same_device_fraction(chain_graph([TaskAttrs(0.5, 1.0)]), m) is None

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(count=0)
        with pytest.raises(ValueError):
            ExperimentConfig(formulations=["device+streaming"])
        assert ExperimentConfig.from_dict(ExperimentConfig().to_dict()) == ExperimentConfig()


class TestRender:
    def test_empty_timeline(self):
        svg = render_gantt(Timeline(clocks={"CPU": 0.0, "CPU_RAM": 0.0}))
        assert svg.count('class="lane"') == 2
        assert 'class="event' not in svg

    def test_single_task_events(self, cg):
        g = chain_graph([TaskAttrs(0.0, 20.0)])
        _, tl = evaluate(g, cg, TimingModel(cg), all_cpu_mapping(g, cg))
        svg = render_gantt(tl, cg.unit_ids, title="one task")
        assert svg.count('class="event read"') == 1
        assert svg.count('class="event compute"') == 1
        assert svg.count('class="event write"') == 1
        assert svg.count('class="lane"') == len(cg.unit_ids)

    def test_dot_fill_by_unit(self, cg):
        g = chain_graph([TaskAttrs(0.0, 20.0)])
        dot = render_dot(g, all_cpu_mapping(g, cg))
        fills = {line.split('fillcolor="')[1][:7] for line in dot.splitlines() if "fillcolor" in line}
        assert len(fills) == 2


def test_load_platform_file(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(preset("CGF").to_dict()))
    assert load_platform(str(path)) == preset("CGF")
