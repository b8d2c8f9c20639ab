import random

import pytest

from hetmap.appgraph import (AppGraph, NodeKind, TaskAttrs, chain_graph, default_sampler,
                             expand_tasks, gen_series_parallel, propagate_sizes)
from hetmap.platform import MemoryUnit, Platform, ProcUnit, complete_links, preset
from hetmap.timing import MeasuredTable, TimingModel, pin_nodes


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def two_unit_platform() -> Platform:
    """Two processors with one private memory each, fully linked."""
    procs = (ProcUnit("P1", clock=1e9), ProcUnit("P2", clock=1e9))
    mems = (MemoryUnit("M1", rate=1e9), MemoryUnit("M2", rate=1e9))
    return Platform(procs, mems, {"P1": frozenset({"M1"}), "P2": frozenset({"M2"})},
                    complete_links(["M1", "M2"]))


def one_unit_platform() -> Platform:
    return Platform((ProcUnit("P1", clock=1e9),), (MemoryUnit("M1", rate=1e9),),
                    {"P1": frozenset({"M1"})})


def compute_chain(n: int) -> AppGraph:
    """Bare compute nodes joined in a chain (no memories)."""
    g = AppGraph()
    prev = None
    for _ in range(n):
        c = g.add_node(NodeKind.COMPUTE, 1.0, TaskAttrs(0.0, 1.0))
        if prev is not None:
            g.add_edge(prev, c)
        prev = c
    return g


def table_timing(platform: Platform, exec_times: dict, transports: dict | None = None
                 ) -> TimingModel:
    table = MeasuredTable(exec=dict(exec_times), transport=dict(transports or {}))
    return TimingModel(platform, backend="table", table=table)


def random_instance(seed: int, max_tasks: int = 6, platform_name: str = "CG",
                    fixed_load: float | None = 1e8):
    """A small generated graph on a preset with source and sink pinned to CPU RAM."""
    rng = random.Random(seed)
    while True:
        sk = gen_series_parallel(rng.randint(1, 9), rng.randrange(10**6))
        if 1 <= sk.num_nodes - 2 <= max_tasks:
            break
    graph = expand_tasks(sk, default_sampler, 1e8, seed=seed, fixed_load=fixed_load)
    platform = preset(platform_name)
    timing = pin_nodes(TimingModel(platform),
                       {n: "CPU_RAM" for n in graph.of_kind(NodeKind.SOURCE, NodeKind.SINK)})
    return graph, platform, timing


def fpga_pipeline(source_bytes):
    """Two streamable tasks measured at 0.3 s and 0.1 s on the FPGA, slow elsewhere."""
    plat = preset("CGF")
    g = chain_graph([TaskAttrs(0.0, 1.0, streamability=5.0, area=5.0)] * 2,
                    source_bytes=source_bytes)
    c1, c2 = g.of_kind(NodeKind.COMPUTE)
    ex = {(c1, "FPGA"): 0.3, (c2, "FPGA"): 0.1}
    ex.update({(c, u): 10.0 for c in (c1, c2) for u in ("CPU", "GPU")})
    tm = TimingModel(plat, backend="mixed", table=MeasuredTable(exec=ex))
    return g, plat, tm


def task_mapping(graph, platform, rng):
    """Random mapping that keeps every task next to one of its processor's memories."""
    mapping = {n: "CPU_RAM" for n in graph.of_kind(NodeKind.SOURCE, NodeKind.SINK)}
    used: dict[str, float] = {}
    for i, c, o in graph.tasks():
        area = graph.nodes[c].attrs.area
        procs = [p.id for p in platform.proc_units
                 if not p.dataflow or used.get(p.id, 0.0) + area <= p.area_capacity]
        proc = rng.choice(procs)
        used[proc] = used.get(proc, 0.0) + area
        mems = sorted(platform.assoc[proc])
        mapping[c] = proc
        mapping[i] = rng.choice(mems)
        mapping[o] = rng.choice(mems)
    return mapping


def mixed_rate_platform() -> Platform:
    procs = (ProcUnit("P1", clock=1e9, cores=4), ProcUnit("P2", clock=1e9, cores=4))
    mems = (MemoryUnit("SLOW", rate=1e9), MemoryUnit("FAST", rate=4e9))
    return Platform(procs, mems, {"P1": frozenset({"SLOW"}), "P2": frozenset({"FAST"})},
                    complete_links(["SLOW", "FAST"]))


def bus_witness():
    """A slow-to-fast copy releases the fast memory early, so a task whose data
    already sits in the fast memory can start before the copy ends."""
    plat = mixed_rate_platform()
    g = AppGraph()
    s1 = g.add_node(NodeKind.SOURCE, 1e9)
    s2 = g.add_node(NodeKind.SOURCE, 1e9)
    c = g.add_task(TaskAttrs(0.0, 1.0))
    a = g.add_task(TaskAttrs(0.0, 1.0))
    t1 = g.add_node(NodeKind.SINK)
    t2 = g.add_node(NodeKind.SINK)
    for e in [(s1, a[0]), (s2, c[0]), (a[2], t1), (c[2], t2)]:
        g.add_edge(*e)
    g = propagate_sizes(g)
    m = {n: ("P2" if g.nodes[n].kind is NodeKind.COMPUTE else "FAST") for n in g.nodes}
    m[s1] = "SLOW"
    return g, plat, TimingModel(plat), m


@pytest.fixture
def cg():
    return preset("CG")


@pytest.fixture
def cgf():
    return preset("CGF")
