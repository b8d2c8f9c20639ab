import math

import pytest

from hetmap.appgraph import AppGraph, GraphError, NodeKind, TaskAttrs, chain_graph
from hetmap.costs import CostTables
from hetmap.milp import (BINARY, InfeasibleModelError, MilpModel, ModelError, big_M,
                         build_device_based, build_formulation, build_time_based, check_order,
                         extract_mapping, mccormick, values_for_assignment)
from hetmap.solver import Formulation, SolverOptions, solve, solve_exhaustive, solve_lp
from hetmap.timing import CompatRule, TimingModel
from hetmap.workbench.io import all_cpu_mapping

from conftest import (compute_chain, fpga_pipeline, one_unit_platform, random_instance,
                      table_timing, two_unit_platform)


def single_compute():
    g = AppGraph()
    g.add_node(NodeKind.COMPUTE, 1.0, TaskAttrs(0.0, 1.0))
    return g


class TestMcCormick:
    def setup_method(self):
        self.m = MilpModel()
        self.a = self.m.add_var("a", BINARY)
        self.b = self.m.add_var("b", BINARY)
        self.w = mccormick(self.m, self.a, self.b)

    def feasible(self, a, b, w):
        worst, _ = self.m.max_violation({self.a: a, self.b: b, self.w: w})
        return worst <= 1e-12

    def test_both_one(self):
        assert self.feasible(1, 1, 1) and not self.feasible(1, 1, 0)
        assert not self.feasible(1, 1, 0.5)

    def test_one_zero(self):
        assert self.feasible(0, 1, 0) and not self.feasible(0, 1, 1)
        assert self.feasible(1, 0, 0) and self.feasible(0, 0, 0)

    def test_memoized(self):
        assert mccormick(self.m, self.a, self.b) == self.w
        assert mccormick(self.m, self.b, self.a) == self.w

    def test_needs_binaries(self):
        c = self.m.add_var("c")
        with pytest.raises(ModelError):
            mccormick(self.m, self.a, c)


class TestBigM:
    def test_single(self):
        plat = two_unit_platform()
        tm = table_timing(plat, {(0, "P1"): 2.0, (0, "P2"): 3.0})
        assert big_M(single_compute(), tm) == 3.0

    def test_chain(self):
        plat = two_unit_platform()
        g = compute_chain(2)
        tm = table_timing(plat, {(0, "P1"): 2.0, (0, "P2"): 3.0, (1, "P1"): 4.0, (1, "P2"): 1.0},
                          {(0, "P1", "P2"): 1.0, (0, "P2", "P1"): 0.5})
        assert big_M(g, tm) == 8.0

    def test_empty(self, cg):
        assert big_M(AppGraph(), TimingModel(cg)) == 0.0


class TestDeviceBased:
    def test_fixed_triple(self):
        plat = one_unit_platform()
        g = AppGraph()
        g.add_task(TaskAttrs(0.0, 1.0), data_bytes=1e9)
        tm = TimingModel(plat)
        sol, mapping = solve_exhaustive(g, plat, tm, Formulation("device"))
        # 1 s read + 1 s compute + 1 s write, all on the single unit pair
        assert sol.objective == pytest.approx(3.0)
        model, maps = build_device_based(g, plat, tm)
        worst, _ = model.max_violation(sol.values)
        assert worst <= 1e-9

    def test_two_units(self):
        plat = two_unit_platform()
        tm = table_timing(plat, {(0, "P1"): 2.0, (0, "P2"): 3.0})
        for mode in ("exhaustive", "bnb", "highs"):
            sol, mapping = solve(single_compute(), plat, tm, Formulation("device"),
                                 SolverOptions(mode=mode))
            assert sol.objective == pytest.approx(2.0)
            assert mapping == {0: "P1"}

    def test_diamond_not_worse_than_all_cpu(self, cg):
        g, _, tm = random_instance(11, max_tasks=4)
        tables = CostTables(g, cg, tm)
        base = tables.device_objective(tables.encode(all_cpu_mapping(g, cg))[None, :])[0]
        sol, _ = solve_exhaustive(g, cg, tm, Formulation("device"))
        assert sol.objective <= base + 1e-12

    def test_no_compatible_unit(self, cg):
        g = chain_graph([TaskAttrs(0.0, 1.0)])
        tm = TimingModel(cg, rule=CompatRule(allowed={2: frozenset({"CPU_RAM"})}))
        with pytest.raises(InfeasibleModelError):
            build_device_based(g, cg, tm)

    def test_streaming_rejected(self, cg):
        with pytest.raises(ModelError):
            build_formulation(AppGraph(), cg, TimingModel(cg), "device", streaming=True)


def chain_timing(plat, d):
    units = [p.id for p in plat.proc_units]
    ex = {(0, u): 2.0 for u in units}
    ex.update({(1, u): 3.0 for u in units})
    tr = {(0, a, b): d for a in units for b in units if a != b}
    return table_timing(plat, ex, tr)


class TestTimeBased:
    def test_serialized_single_unit(self):
        plat = one_unit_platform()
        g = compute_chain(2)
        tm = chain_timing(plat, 0.0)
        sol, _ = solve_exhaustive(g, plat, tm, Formulation("time"))
        assert sol.objective == pytest.approx(5.0)
        model, maps = build_time_based(g, plat, tm)
        assert sol.values[maps.y[(1, 0)]] >= sol.values[maps.y[(0, 1)]] - 1e-12

    def test_two_units_precedence_binds(self):
        plat = two_unit_platform()
        g = compute_chain(2)
        sol, _ = solve_exhaustive(g, plat, chain_timing(plat, 0.0), Formulation("time"))
        assert sol.objective == pytest.approx(5.0)

    def test_two_units_forced_apart(self):
        plat = two_unit_platform()
        g = compute_chain(2)
        tm = chain_timing(plat, 1.0).with_rule(
            CompatRule(allowed={0: frozenset({"P1"}), 1: frozenset({"P2"})}))
        sol, _ = solve_exhaustive(g, plat, tm, Formulation("time"))
        assert sol.objective == pytest.approx(6.0)

    def test_path_pruned_drops_rows_keeps_optimum(self, cg):
        g, _, tm = random_instance(21, max_tasks=3)
        full, _ = build_time_based(g, cg, tm, pairs="all")
        pruned, _ = build_time_based(g, cg, tm, pairs="path-pruned")
        assert len(pruned.constraints) < len(full.constraints)
        a, _ = solve(g, cg, tm, Formulation("time", pairs="all"), SolverOptions(mode="highs"))
        b, _ = solve(g, cg, tm, Formulation("time", pairs="path-pruned"),
                     SolverOptions(mode="highs"))
        assert a.objective == pytest.approx(b.objective, rel=1e-9)

    def test_bad_pairs(self, cg):
        with pytest.raises(ModelError):
            build_time_based(AppGraph(), cg, TimingModel(cg), pairs="some")

    def test_order_check(self):
        g = compute_chain(3)
        check_order(g, [0, 1, 2])
        with pytest.raises(GraphError):
            check_order(g, [1, 0, 2])
        with pytest.raises(GraphError):
            check_order(g, [0, 1])

    def test_fixed_binaries_lp_equals_schedule(self, cg):
        g, _, tm = random_instance(8, max_tasks=3)
        form = Formulation("time")
        tables = CostTables(g, cg, tm)
        model, maps = form.build(g, cg, tm, tables)
        from hetmap.solver import schedule_from_assignment
        mapping = all_cpu_mapping(g, cg)
        z, _ = schedule_from_assignment(g, mapping, None, tm)
        row = tables.encode(mapping)
        vals = values_for_assignment(model, maps, tables, row, 0.0)
        fixed = {v: vals[v] for v in model.binaries()}
        res = solve_lp(model, fixed)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(z, rel=1e-9)


class TestStreamingExtension:
    def test_pipeline_max_not_sum(self):
        g, plat, tm = fpga_pipeline(1e8)
        on, m_on = solve_exhaustive(g, plat, tm, Formulation.parse("time+streaming"))
        off, _ = solve_exhaustive(g, plat, tm, Formulation.parse("time"))
        assert on.objective == pytest.approx(0.3, rel=1e-9)
        assert off.objective == pytest.approx(0.4 + 4 * 1e8 / 11e9, rel=1e-9)
        assert m_on[g.of_kind(NodeKind.COMPUTE)[0]] == "FPGA"

    def test_same_group_edge_reduces_to_start_order(self):
        g, plat, tm = fpga_pipeline(1e8)
        model, maps = build_formulation(g, plat, tm, "time", streaming=True)
        c1, c2 = g.of_kind(NodeKind.COMPUTE)
        o1 = g.successors(c1)[0]
        i2 = g.successors(o1)[0]
        names = {c.name for c in model.constraints}
        assert f"sprec_{o1}_{i2}" in names and f"pend_{o1}_{i2}" in names

    def test_other_unit_keeps_plain_precedence(self):
        g, plat, tm = fpga_pipeline(1e8)
        model, maps = build_formulation(g, plat, tm, "time", streaming=True)
        c1 = g.of_kind(NodeKind.COMPUTE)[0]
        i1 = g.predecessors(c1)[0]
        row = next(c for c in model.constraints if c.name == f"prec_{i1}_{c1}")
        # a CPU-side pair keeps its transfer term and gets no relaxation
        tables = CostTables(g, plat, tm)
        cpu_pair = maps.w.get((i1, "CPU_RAM", c1, "CPU"))
        assert cpu_pair is not None and row.coeffs[cpu_pair] < 0
        assert row.coeffs[cpu_pair] == pytest.approx(
            -tables.d[tables.edges.tolist().index([tables.pos[i1], tables.pos[c1]]),
                      tables.upos["CPU_RAM"], tables.upos["CPU"]])


class TestExtract:
    def setup_method(self):
        plat = two_unit_platform()
        self.tm = table_timing(plat, {(0, "P1"): 2.0, (0, "P2"): 3.0})
        self.model, self.maps = build_device_based(single_compute(), plat, self.tm)
        self.x1 = self.maps.x[(0, "P1")]
        self.x2 = self.maps.x[(0, "P2")]

    def test_exact(self):
        assert extract_mapping({self.x1: 1.0, self.x2: 0.0}, self.maps) == {0: "P1"}

    def test_tolerance(self):
        assert extract_mapping({self.x1: 1e-8, self.x2: 0.9999999}, self.maps) == {0: "P2"}

    def test_fractional(self):
        with pytest.raises(ModelError, match="fractional"):
            extract_mapping({self.x1: 0.5, self.x2: 0.5}, self.maps)


@pytest.mark.parametrize("kind", ["device", "time"])
@pytest.mark.parametrize("seed", range(6))
def test_closed_form_points_are_feasible(kind, seed, cg):
    g, _, tm = random_instance(seed + 100, max_tasks=3)
    tables = CostTables(g, cg, tm)
    form = Formulation(kind)
    model, maps = form.build(g, cg, tm, tables)
    from hetmap.solver.exhaustive import objectives
    from hetmap.costs import enumerate_assignments, space_size
    A = enumerate_assignments(tables, 0, min(space_size(tables), 64))
    order_pos = tables.order_positions(form.resolved_order(g)) if kind == "time" else None
    obj, y0, y1 = objectives(tables, A, form, order_pos)
    for k in range(len(A)):
        if not math.isfinite(obj[k]):
            continue
        vals = values_for_assignment(model, maps, tables, A[k], float(obj[k]),
                                     None if y0 is None else y0[k], None if y1 is None else y1[k])
        worst, name = model.max_violation(vals)
        assert worst <= 1e-9, name
        assert model.objective_value(vals) == pytest.approx(obj[k])
