"""Memory-augmented task graphs.

A task is an ``InputMem -> Compute -> OutputMem`` triple; tasks are wired
together through their memory nodes, plus optional source and sink memory
nodes.  Node ids are dense integers in creation order.
"""

from __future__ import annotations

import enum
import math
import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional


class GraphError(ValueError):
    """Raised when a graph violates the structure an operation requires."""


class NodeKind(str, enum.Enum):
    SOURCE = "source"
    SINK = "sink"
    INPUT_MEM = "input_mem"
    COMPUTE = "compute"
    OUTPUT_MEM = "output_mem"

    @property
    def is_memory(self) -> bool:
        return self is not NodeKind.COMPUTE


@dataclass(frozen=True)
class TaskAttrs:
    parallelizability: float
    complexity_coeff: float
    data_ratio: float = 1.0
    streamability: float = 1.0
    area: float = 0.0

    def problems(self) -> list[str]:
        out = []
        if not 0.0 <= self.parallelizability <= 1.0:
            out.append("parallelizability outside [0, 1]")
        if not self.complexity_coeff > 0:
            out.append("complexity_coeff must be positive")
        if not self.data_ratio > 0:
            out.append("data_ratio must be positive")
        if not self.streamability >= 1:
            out.append("streamability must be >= 1")
        if not self.area >= 0:
            out.append("area must be nonnegative")
        return out


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    data_bytes: float = 0.0
    attrs: Optional[TaskAttrs] = None

    @property
    def output_bytes(self) -> float:
        """Bytes this node hands to its successors."""
        if self.kind is NodeKind.COMPUTE and self.attrs is not None:
            return self.attrs.data_ratio * self.data_bytes
        return self.data_bytes


@dataclass
class AppGraph:
    nodes: dict[int, Node] = field(default_factory=dict)
    edges: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._succ: Optional[dict[int, list[int]]] = None
        self._pred: Optional[dict[int, list[int]]] = None

    # construction helpers

    def add_node(self, kind: NodeKind, data_bytes: float = 0.0,
                 attrs: Optional[TaskAttrs] = None) -> int:
        nid = len(self.nodes)
        while nid in self.nodes:
            nid += 1
        self.nodes[nid] = Node(nid, kind, data_bytes, attrs)
        self._succ = self._pred = None
        return nid

    def add_edge(self, u: int, v: int) -> None:
        self.edges.append((u, v))
        self._succ = self._pred = None

    def add_task(self, attrs: TaskAttrs, data_bytes: float = 0.0) -> tuple[int, int, int]:
        """Append an input/compute/output triple and return its three ids."""
        i = self.add_node(NodeKind.INPUT_MEM, data_bytes)
        c = self.add_node(NodeKind.COMPUTE, data_bytes, attrs)
        o = self.add_node(NodeKind.OUTPUT_MEM, attrs.data_ratio * data_bytes)
        self.add_edge(i, c)
        self.add_edge(c, o)
        return i, c, o

    # adjacency

    def _index(self) -> None:
        succ: dict[int, list[int]] = {n: [] for n in self.nodes}
        pred: dict[int, list[int]] = {n: [] for n in self.nodes}
        for u, v in self.edges:
            if u in succ and v in pred:
                succ[u].append(v)
                pred[v].append(u)
        self._succ, self._pred = succ, pred

    def successors(self, n: int) -> list[int]:
        if self._succ is None:
            self._index()
        return self._succ[n]  # type: ignore[index]

    def predecessors(self, n: int) -> list[int]:
        if self._pred is None:
            self._index()
        return self._pred[n]  # type: ignore[index]

    def of_kind(self, *kinds: NodeKind) -> list[int]:
        return [n.id for n in self.nodes.values() if n.kind in kinds]

    def tasks(self) -> list[tuple[int, int, int]]:
        """(input, compute, output) id triples, ordered by compute id."""
        out = []
        for c in sorted(self.of_kind(NodeKind.COMPUTE)):
            out.append((self.predecessors(c)[0], c, self.successors(c)[0]))
        return out

    def copy(self) -> "AppGraph":
        return AppGraph(dict(self.nodes), list(self.edges))

    def with_node(self, node: Node) -> "AppGraph":
        g = self.copy()
        g.nodes[node.id] = node
        return g

    # serialization

    def to_dict(self) -> dict:
        nodes = []
        for n in sorted(self.nodes.values(), key=lambda n: n.id):
            entry: dict = {"id": n.id, "kind": n.kind.value, "data_bytes": n.data_bytes}
            if n.attrs is not None:
                entry["attrs"] = {
                    "parallelizability": n.attrs.parallelizability,
                    "complexity_coeff": n.attrs.complexity_coeff,
                    "data_ratio": n.attrs.data_ratio,
                    "streamability": n.attrs.streamability,
                    "area": n.attrs.area,
                }
            nodes.append(entry)
        return {"nodes": nodes, "edges": [[u, v] for u, v in self.edges]}

    @classmethod
    def from_dict(cls, data: dict) -> "AppGraph":
        try:
            g = cls()
            for entry in data["nodes"]:
                attrs = entry.get("attrs")
                node = Node(
                    id=int(entry["id"]),
                    kind=NodeKind(entry["kind"]),
                    data_bytes=float(entry.get("data_bytes", 0.0)),
                    attrs=TaskAttrs(**attrs) if attrs is not None else None,
                )
                if node.id in g.nodes:
                    raise GraphError(f"duplicate node id {node.id}")
                g.nodes[node.id] = node
            g.edges = [(int(u), int(v)) for u, v in data["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, GraphError):
                raise
            raise GraphError(f"malformed graph document: {exc}") from exc
        return g


# -- validation ---------------------------------------------------------------

_MEM_SOURCES = (NodeKind.OUTPUT_MEM, NodeKind.SOURCE)
_MEM_TARGETS = (NodeKind.INPUT_MEM, NodeKind.SINK)


def _find_cycle_nodes(graph: AppGraph) -> list[int]:
    indeg = {n: 0 for n in graph.nodes}
    for u, v in graph.edges:
        if u in indeg and v in indeg:
            indeg[v] += 1
    queue = deque(n for n, d in indeg.items() if d == 0)
    seen = 0
    while queue:
        n = queue.popleft()
        seen += 1
        for s in graph.successors(n):
            indeg[s] -= 1
            if indeg[s] == 0:
                queue.append(s)
    return sorted(n for n, d in indeg.items() if d > 0)


def validate(graph: AppGraph) -> list[str]:
    """Return every structural violation, in a deterministic order."""
    out: list[str] = []
    nodes = graph.nodes
    seen_edges = set()
    for u, v in graph.edges:
        if u not in nodes or v not in nodes:
            out.append(f"edge ({u}, {v}) references an unknown node")
            continue
        if u == v:
            out.append(f"self-loop on node {u}")
        if (u, v) in seen_edges:
            out.append(f"duplicate edge ({u}, {v})")
        seen_edges.add((u, v))
        ku, kv = nodes[u].kind, nodes[v].kind
        if ku is NodeKind.COMPUTE and kv is NodeKind.COMPUTE:
            out.append(f"computation nodes must connect via memories: edge ({u}, {v})")
        elif ku is NodeKind.INPUT_MEM:
            if kv is not NodeKind.COMPUTE:
                out.append(f"input memory {u} may only feed a computation node: edge ({u}, {v})")
        elif ku is NodeKind.COMPUTE:
            if kv is not NodeKind.OUTPUT_MEM:
                out.append(f"computation node {u} may only feed an output memory: edge ({u}, {v})")
        elif kv is NodeKind.COMPUTE:
            out.append(f"computation node {v} must be fed by an input memory: edge ({u}, {v})")
        elif not (ku in _MEM_SOURCES and kv in _MEM_TARGETS):
            out.append(f"edge ({u}, {v}) from {ku.value} to {kv.value} is not allowed")

    cyc = _find_cycle_nodes(graph)
    if cyc:
        out.append(f"not a DAG: nodes {cyc} lie on or behind a cycle")

    for nid in sorted(nodes):
        n = nodes[nid]
        preds, succs = graph.predecessors(nid), graph.successors(nid)
        if n.kind is NodeKind.COMPUTE:
            if n.attrs is None:
                out.append(f"computation node {nid} has no task attributes")
            else:
                out.extend(f"node {nid}: {p}" for p in n.attrs.problems())
            if len(preds) != 1:
                out.append(f"computation node {nid} needs exactly one input memory, has {len(preds)}")
            if len(succs) != 1:
                out.append(f"computation node {nid} needs exactly one output memory, has {len(succs)}")
        elif n.attrs is not None:
            out.append(f"memory node {nid} carries task attributes")
        if n.kind is NodeKind.SOURCE and preds:
            out.append(f"source {nid} has incoming edges")
        if n.kind is NodeKind.SINK and succs:
            out.append(f"sink {nid} has outgoing edges")
        if n.kind is NodeKind.INPUT_MEM and len(succs) != 1:
            out.append(f"input memory {nid} needs exactly one computation successor, has {len(succs)}")
        if n.kind is NodeKind.OUTPUT_MEM and len(preds) != 1:
            out.append(f"output memory {nid} needs exactly one computation predecessor, has {len(preds)}")
        if not (n.data_bytes >= 0 and math.isfinite(n.data_bytes)):
            out.append(f"node {nid} has invalid data_bytes {n.data_bytes}")
    return out


def topsort_bfs(graph: AppGraph, seed: Optional[int] = None) -> list[int]:
    """Layered (Kahn) topological order.

    Nodes of one layer are ordered by id, or shuffled with ``random.Random(seed)``.
    """
    rng = random.Random(seed) if seed is not None else None
    indeg = {n: len(graph.predecessors(n)) for n in graph.nodes}
    layer = sorted(n for n, d in indeg.items() if d == 0)
    order: list[int] = []
    while layer:
        if rng is not None:
            rng.shuffle(layer)
        order.extend(layer)
        nxt = []
        for n in layer:
            for s in graph.successors(n):
                indeg[s] -= 1
                if indeg[s] == 0:
                    nxt.append(s)
        layer = sorted(nxt)
    if len(order) != len(graph.nodes):
        raise GraphError("not a DAG")
    return order


# -- random series-parallel skeletons -------------------------------------------


@dataclass
class Skeleton:
    """Plain DAG produced by the series-parallel generator: node 0 is the
    source, node 1 the sink."""

    num_nodes: int
    edges: list[tuple[int, int]]
    source: int = 0
    sink: int = 1


def gen_series_parallel(m: int, seed: int) -> Skeleton:
    """Grow a random series-parallel DAG to ``m`` edges, then drop duplicates.

    Each step picks an edge uniformly; with probability ``0.5 + 0.5*i/m``
    (``i`` = edges added so far) it is split by a new node, otherwise it is
    copied.
    """
    if m < 1:
        raise GraphError("m must be >= 1")
    rng = random.Random(seed)
    edges = [(0, 1)]
    n = 2
    while len(edges) < m:
        added = len(edges) - 1
        k = rng.randrange(len(edges))
        u, v = edges[k]
        if rng.random() < 0.5 + 0.5 * added / m:
            edges[k] = (u, n)
            edges.append((n, v))
            n += 1
        else:
            edges.append((u, v))
    unique = list(dict.fromkeys(edges))
    return Skeleton(n, unique)


# -- skeleton -> task graph -------------------------------------------------------

AttrSampler = Callable[[random.Random], TaskAttrs]


def default_sampler(rng: random.Random) -> TaskAttrs:
    p = rng.uniform(0.0, 1.0)
    c = rng.lognormvariate(3.0, 0.5)
    return TaskAttrs(parallelizability=p, complexity_coeff=c, data_ratio=1.0,
                     streamability=max(1.0, c), area=c)


def constant_complexity_sampler(c: float) -> AttrSampler:
    """Sampler with uniform parallelizability and a fixed complexity factor."""

    def sample(rng: random.Random) -> TaskAttrs:
        p = rng.uniform(0.0, 1.0)
        return TaskAttrs(parallelizability=p, complexity_coeff=c, data_ratio=1.0,
                         streamability=max(1.0, c), area=c)

    return sample


def _skeleton_order(sk: Skeleton) -> list[int]:
    indeg = [0] * sk.num_nodes
    succ: list[list[int]] = [[] for _ in range(sk.num_nodes)]
    for u, v in sk.edges:
        succ[u].append(v)
        indeg[v] += 1
    queue = deque(sorted(i for i in range(sk.num_nodes) if indeg[i] == 0))
    order = []
    while queue:
        u = queue.popleft()
        order.append(u)
        for v in succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    if len(order) != sk.num_nodes:
        raise GraphError("skeleton is not a DAG")
    return order


def expand_tasks(skeleton: Skeleton, sampler: AttrSampler = default_sampler,
                 source_bytes: float = 1e8, seed: int = 0,
                 fixed_load: Optional[float] = None) -> AppGraph:
    """Turn every internal skeleton node into a task triple.

    Sources with no in-edges and sinks with no out-edges stay memory nodes.
    Bytes propagate along the graph: an input memory receives the sum of its
    predecessors' bytes, an output memory ``data_ratio`` times that.  With
    ``fixed_load`` every task sees exactly that many input bytes instead.
    Attributes are drawn in skeleton topological order from ``Random(seed)``.
    """
    order = _skeleton_order(skeleton)
    indeg = [0] * skeleton.num_nodes
    outdeg = [0] * skeleton.num_nodes
    for u, v in skeleton.edges:
        outdeg[u] += 1
        indeg[v] += 1
    for i in range(skeleton.num_nodes):
        if indeg[i] == 0 and outdeg[i] == 0:
            raise GraphError(f"skeleton node {i} is isolated")

    rng = random.Random(seed)
    g = AppGraph()
    entry: dict[int, int] = {}  # skeleton node -> graph node receiving its in-edges
    exit_: dict[int, int] = {}  # skeleton node -> graph node emitting its out-edges
    for s in order:
        if indeg[s] == 0:
            nid = g.add_node(NodeKind.SOURCE, source_bytes)
            entry[s] = exit_[s] = nid
        elif outdeg[s] == 0:
            nid = g.add_node(NodeKind.SINK)
            entry[s] = exit_[s] = nid
        else:
            i, _, o = g.add_task(sampler(rng))
            entry[s], exit_[s] = i, o
    for u, v in skeleton.edges:
        g.add_edge(exit_[u], entry[v])
    return propagate_sizes(g, fixed_load=fixed_load)


def propagate_sizes(graph: AppGraph, fixed_load: Optional[float] = None) -> AppGraph:
    """Recompute ``data_bytes`` of every non-source node in topological order."""
    g = graph.copy()
    for nid in topsort_bfs(g):
        node = g.nodes[nid]
        if node.kind is NodeKind.SOURCE:
            continue
        preds = g.predecessors(nid)
        if node.kind is NodeKind.INPUT_MEM and fixed_load is not None:
            size = fixed_load
        elif node.kind in (NodeKind.INPUT_MEM, NodeKind.SINK):
            size = sum(g.nodes[p].output_bytes for p in preds)
        else:
            size = g.nodes[preds[0]].output_bytes if preds else node.data_bytes
        g.nodes[nid] = replace(node, data_bytes=size)
    return g


def to_dot(graph: AppGraph, mapping: Optional[dict[int, str]] = None,
           colors: Optional[dict[str, str]] = None) -> str:
    """Graphviz text; shape encodes node kind, fill colour the assigned unit."""
    shapes = {
        NodeKind.SOURCE: "invhouse",
        NodeKind.SINK: "house",
        NodeKind.INPUT_MEM: "cylinder",
        NodeKind.OUTPUT_MEM: "cylinder",
        NodeKind.COMPUTE: "box",
    }
    palette = ["#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3",
               "#fdb462", "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd"]
    if mapping is not None and colors is None:
        units = sorted(set(mapping.values()))
        colors = {u: palette[k % len(palette)] for k, u in enumerate(units)}
    lines = ["digraph taskgraph {", "  rankdir=TB;"]
    for nid in sorted(graph.nodes):
        n = graph.nodes[nid]
        label = f"{nid}"
        if n.attrs is not None:
            label += f"\\np={n.attrs.parallelizability:.2f} c={n.attrs.complexity_coeff:.1f}"
        attrs = [f'label="{label}"', f"shape={shapes[n.kind]}"]
        if mapping is not None and nid in mapping:
            attrs.append(f'style=filled fillcolor="{colors[mapping[nid]]}"')  # type: ignore[index]
            attrs[0] = f'label="{label}\\n[{mapping[nid]}]"'
        lines.append(f"  n{nid} [{' '.join(attrs)}];")
    for u, v in graph.edges:
        lines.append(f"  n{u} -> n{v};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def chain_graph(attrs: Iterable[TaskAttrs], source_bytes: float = 1e8) -> AppGraph:
    """Source -> task -> task -> ... -> sink."""
    g = AppGraph()
    prev = g.add_node(NodeKind.SOURCE, source_bytes)
    for a in attrs:
        i, _, o = g.add_task(a)
        g.add_edge(prev, i)
        prev = o
    sink = g.add_node(NodeKind.SINK)
    g.add_edge(prev, sink)
    return propagate_sizes(g)
