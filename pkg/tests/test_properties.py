import math
import random

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from hetmap.appgraph import (Node, NodeKind, TaskAttrs, default_sampler, expand_tasks,
                             gen_series_parallel, topsort_bfs, validate)
from hetmap.evaluator import EvalOptions, evaluate
from hetmap.platform import preset
from hetmap.timing import TimingModel

from conftest import random_instance, task_mapping

CGF = preset("CGF")
TM = TimingModel(CGF)
MEMS = [m.id for m in CGF.memories]

settings.register_profile("hetmap", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("hetmap")


@given(st.integers(1, 25), st.integers(0, 10**6), st.integers(0, 50))
def test_topsort_respects_edges(m, seed, order_seed):
    g = expand_tasks(gen_series_parallel(m, seed), default_sampler, 1e8, seed=seed)
    assert validate(g) == []
    order = topsort_bfs(g, seed=order_seed)
    pos = {n: k for k, n in enumerate(order)}
    assert sorted(order) == sorted(g.nodes)
    assert all(pos[u] < pos[v] for u, v in g.edges)


@given(st.floats(0, 1e10), st.sampled_from(MEMS), st.sampled_from(MEMS))
def test_transport_symmetric(nbytes, a, b):
    n = Node(0, NodeKind.OUTPUT_MEM, nbytes)
    assert TM.transport_time(n, a, b) == TM.transport_time(n, b, a)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 100), st.floats(1, 1e9),
       st.sampled_from(["CPU", "GPU", "FPGA"]))
def test_exec_monotone_in_parallel_fraction(p1, p2, c, nbytes, unit):
    lo, hi = sorted((p1, p2))
    t_lo = TM.exec_time(Node(1, NodeKind.COMPUTE, nbytes, TaskAttrs(lo, c)), unit)
    t_hi = TM.exec_time(Node(1, NodeKind.COMPUTE, nbytes, TaskAttrs(hi, c)), unit)
    assert t_hi <= t_lo * (1 + 1e-12)


@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_bus_overlap_never_slower(inst_seed, map_seed):
    g, plat, tm = random_instance(inst_seed, max_tasks=5, platform_name="CGF")
    mapping = task_mapping(g, plat, random.Random(map_seed))
    off, _ = evaluate(g, plat, tm, mapping)
    on, _ = evaluate(g, plat, tm, mapping, EvalOptions(bus_overlap=True))
    assert math.isfinite(off)
    assert on <= off * (1 + 1e-12)
