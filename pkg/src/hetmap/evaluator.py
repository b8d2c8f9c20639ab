"""Cost of a mapping: a per-device clock simulation over a BFS topological order.

Every unit keeps its own clock.  A task synchronises the clocks of its input
memory, processor and output memory and advances all three by
read + compute + write.  A transfer between two memory nodes synchronises
and advances the two memories involved.  The cost is the latest clock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .appgraph import AppGraph, NodeKind, topsort_bfs
from .platform import Platform, memory_rate
from .timing import TimingModel

Mapping = dict[int, str]


class EvaluationError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("invalid mapping: " + "; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class Event:
    node: int
    unit: str
    start: float
    end: float
    kind: str  # compute | read | write | transfer
    peer: Optional[str] = None

    def to_dict(self) -> dict:
        return {"node": self.node, "unit": self.unit, "start": self.start,
                "end": self.end, "kind": self.kind, "peer": self.peer}


@dataclass
class Timeline:
    clocks: dict[str, float] = field(default_factory=dict)
    events: list[Event] = field(default_factory=list)
    data_ready: dict[int, float] = field(default_factory=dict)
    infinite_edge: Optional[tuple[int, int]] = None

    @property
    def makespan(self) -> float:
        return max(self.clocks.values(), default=0.0)

    def to_dict(self) -> dict:
        return {
            "makespan": self.makespan,
            "clocks": dict(sorted(self.clocks.items())),
            "events": [e.to_dict() for e in self.events],
            "data_ready": {str(k): v for k, v in sorted(self.data_ready.items())},
            "infinite_edge": list(self.infinite_edge) if self.infinite_edge else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Timeline":
        edge = data.get("infinite_edge")
        return cls(
            clocks=dict(data.get("clocks", {})),
            events=[Event(**e) for e in data.get("events", [])],
            data_ready={int(k): v for k, v in data.get("data_ready", {}).items()},
            infinite_edge=tuple(edge) if edge else None,
        )


@dataclass(frozen=True)
class EvalOptions:
    bus_overlap: bool = False
    streaming: bool = False
    order_seed: Optional[int] = None


def verify_mapping(graph: AppGraph, platform: Platform, timing: TimingModel,
                   mapping: Mapping) -> list[str]:
    out = []
    units = set(platform.unit_ids)
    for nid in sorted(graph.nodes):
        if nid not in mapping:
            out.append(f"node {nid} is not mapped")
            continue
        unit = mapping[nid]
        if unit not in units:
            out.append(f"node {nid} mapped to unknown unit {unit}")
        elif not timing.compatible(graph.nodes[nid], unit):
            out.append(f"node {nid} ({graph.nodes[nid].kind.value}) is not compatible with {unit}")
    for nid in sorted(set(mapping) - set(graph.nodes)):
        out.append(f"mapping names unknown node {nid}")
    for dev in platform.dataflow_units():
        used = sum(graph.nodes[n].attrs.area for n, u in mapping.items()  # type: ignore[union-attr]
                   if u == dev.id and n in graph.nodes and graph.nodes[n].attrs is not None)
        if used > dev.area_capacity + 1e-9:
            out.append(f"area capacity of {dev.id} exceeded: {used:g} > {dev.area_capacity:g}")
    return out


# -- streaming --------------------------------------------------------------------


@dataclass
class StreamedGraph:
    """A graph whose streamable chains were folded into single tasks.

    ``exec_override`` holds the folded execution time of each representative
    compute node; ``members`` lists the original compute nodes per representative.
    """

    graph: AppGraph
    mapping: Mapping
    exec_override: dict[int, float]
    members: dict[int, list[int]]
    pipelined: dict[int, bool]


def _chain_next(graph: AppGraph, mapping: Mapping,
                task_of_input: dict[int, tuple[int, int, int]],
                task: tuple[int, int, int]) -> Optional[tuple[int, int, int]]:
    _, c, o = task
    succ = graph.successors(o)
    if len(succ) != 1 or succ[0] not in task_of_input:
        return None
    nxt = task_of_input[succ[0]]
    i2, c2, _ = nxt
    if len(graph.predecessors(i2)) != 1:
        return None
    if mapping[c2] != mapping[c] or mapping[i2] != mapping[o]:
        return None
    if graph.nodes[c2].attrs.streamability <= 1:  # type: ignore[union-attr]
        return None
    return nxt


def compress_streams(graph: AppGraph, mapping: Mapping, platform: Platform,
                     timing: TimingModel) -> StreamedGraph:
    """Fold chains of streamable tasks that share a processor.

    On a dataflow unit the chain is pipelined and costs as much as its most
    expensive member (compute or internal memory access); chains that would
    exceed the unit's area are cut greedily in topological order.  On other
    units only the intermediate reads and writes disappear.
    """
    tasks = graph.tasks()
    task_of_input = {t[0]: t for t in tasks}
    nxt: dict[int, tuple[int, int, int]] = {}
    has_prev: set[int] = set()
    for t in tasks:
        if graph.nodes[t[1]].attrs.streamability <= 1:  # type: ignore[union-attr]
            continue
        n = _chain_next(graph, mapping, task_of_input, t)
        if n is not None:
            nxt[t[1]] = n
            has_prev.add(n[1])

    order = {nid: k for k, nid in enumerate(topsort_bfs(graph))}
    segments: list[list[tuple[int, int, int]]] = []
    for t in sorted(tasks, key=lambda t: order[t[1]]):
        if t[1] in has_prev or t[1] not in nxt:
            continue
        chain = [t]
        while chain[-1][1] in nxt:
            chain.append(nxt[chain[-1][1]])
        dev = platform.proc(mapping[t[1]])
        if dev is not None and dev.dataflow:
            seg: list[tuple[int, int, int]] = []
            area = 0.0
            for task in chain:
                a = graph.nodes[task[1]].attrs.area  # type: ignore[union-attr]
                if seg and area + a > dev.area_capacity + 1e-12:
                    segments.append(seg)
                    seg, area = [], 0.0
                seg.append(task)
                area += a
            segments.append(seg)
        else:
            segments.append(chain)

    g = graph.copy()
    override: dict[int, float] = {}
    members: dict[int, list[int]] = {}
    pipelined: dict[int, bool] = {}
    drop: set[int] = set()
    for seg in segments:
        if len(seg) < 2:
            continue
        first, last = seg[0], seg[-1]
        rep = first[1]
        unit = mapping[rep]
        dev = platform.proc(unit)
        is_flow = bool(dev is not None and dev.dataflow)
        costs = [timing.exec_time(graph.nodes[c], unit) for _, c, _ in seg]
        if is_flow:
            inner = list(costs)
            for k, (i, c, o) in enumerate(seg):
                if k > 0:
                    inner.append(timing.transport_time(graph.nodes[i], mapping[i], unit))
                if k < len(seg) - 1:
                    inner.append(timing.transport_time(graph.nodes[c], unit, mapping[o]))
            override[rep] = max(inner)
        else:
            override[rep] = sum(costs)
        members[rep] = [c for _, c, _ in seg]
        pipelined[rep] = is_flow
        for k, (i, c, o) in enumerate(seg):
            if k > 0:
                drop.update((i, c))
            if k < len(seg) - 1:
                drop.add(o)
        in_bytes = graph.nodes[first[0]].data_bytes
        out_bytes = graph.nodes[last[2]].data_bytes
        rep_node = graph.nodes[rep]
        ratio = out_bytes / in_bytes if in_bytes > 0 else 1.0
        g.nodes[rep] = replace(rep_node, attrs=replace(rep_node.attrs, data_ratio=ratio))
        g.edges = [(u, v) for u, v in g.edges if not (u == last[1] and v == last[2])]
        g.edges.append((rep, last[2]))
    g.nodes = {n: node for n, node in g.nodes.items() if n not in drop}
    g.edges = [(u, v) for u, v in g.edges if u not in drop and v not in drop]
    g = AppGraph(g.nodes, g.edges)
    return StreamedGraph(g, {n: u for n, u in mapping.items() if n in g.nodes},
                         override, members, pipelined)


# -- clock simulation -------------------------------------------------------------


def _rate(platform: Platform, unit: str) -> Optional[float]:
    mem = platform.memory(unit)
    if mem is None or mem.is_virtual:
        return None
    return memory_rate(mem)


def evaluate(graph: AppGraph, platform: Platform, timing: TimingModel,
             mapping: Mapping, options: EvalOptions = EvalOptions()) -> tuple[float, Timeline]:
    """Makespan of ``mapping`` together with the full event timeline."""
    violations = verify_mapping(graph, platform, timing, mapping)
    if violations:
        raise EvaluationError(violations)

    full_nodes = graph.nodes
    override: dict[int, float] = {}
    members: dict[int, list[int]] = {}
    pipelined: dict[int, bool] = {}
    if options.streaming:
        sg = compress_streams(graph, mapping, platform, timing)
        graph, mapping = sg.graph, sg.mapping
        override, members, pipelined = sg.exec_override, sg.members, sg.pipelined

    tl = Timeline(clocks={u: 0.0 for u in platform.unit_ids})
    clocks = tl.clocks
    ready = tl.data_ready

    def blow_up(edge: tuple[int, int]) -> tuple[float, Timeline]:
        tl.infinite_edge = edge
        for u in clocks:
            clocks[u] = math.inf
        return math.inf, tl

    for i in topsort_bfs(graph, seed=options.order_seed):
        node = graph.nodes[i]
        if node.kind is NodeKind.INPUT_MEM:
            (j,) = graph.successors(i)
            (k,) = graph.successors(j)
            pi, pj, pk = mapping[i], mapping[j], mapping[k]
            start = max(clocks[pi], clocks[pj], clocks[pk], ready.get(i, 0.0))
            d_in = timing.transport_time(node, pi, pj)
            if j in override:
                t = override[j]
            else:
                t = timing.exec_time(graph.nodes[j], pj)
            d_out = timing.transport_time(graph.nodes[j], pj, pk)
            if math.isinf(d_in):
                return blow_up((i, j))
            if math.isinf(t) or math.isinf(d_out):
                return blow_up((j, k))
            end = start + d_in + t + d_out
            clocks[pi] = clocks[pj] = clocks[pk] = end
            ready[k] = end
            c0 = start + d_in
            tl.events.append(Event(i, pi, start, c0, "read", pj))
            if j in members:
                cursor = c0
                for c in members[j]:
                    tc = timing.exec_time(full_nodes[c], pj)
                    if pipelined[j]:
                        tl.events.append(Event(c, pj, c0, c0 + tc, "compute"))
                    else:
                        tl.events.append(Event(c, pj, cursor, cursor + tc, "compute"))
                        cursor += tc
            else:
                tl.events.append(Event(j, pj, c0, c0 + t, "compute"))
            tl.events.append(Event(k, pk, c0 + t, end, "write", pj))
        elif node.kind in (NodeKind.OUTPUT_MEM, NodeKind.SOURCE):
            pi = mapping[i]
            for j in graph.successors(i):
                pj = mapping[j]
                start = max(clocks[pi], clocks[pj], ready.get(i, 0.0))
                tau = timing.transport_time(node, pi, pj)
                if math.isinf(tau):
                    return blow_up((i, j))
                ri, rj = _rate(platform, pi), _rate(platform, pj)
                if options.bus_overlap and pi != pj and ri is not None and rj is not None:
                    slow, fast = (pi, pj) if ri <= rj else (pj, pi)
                    clocks[slow] = start + tau
                    clocks[fast] = start + min(ri, rj) / max(ri, rj) * tau
                else:
                    clocks[pi] = clocks[pj] = start + tau
                ready[j] = max(ready.get(j, 0.0), start + tau)
                if tau > 0:
                    tl.events.append(Event(i, pi, start, start + tau, "transfer", pj))
    return tl.makespan, tl

