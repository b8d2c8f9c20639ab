"""Device-based and time-based MILP formulations of the mapping problem.

Models are built into a small solver-neutral IR.  Products of two binary
assignment variables are replaced by McCormick variables, incompatible
(node, unit) pairs simply get no variable, and pairs joined by an infinite
transfer are excluded by an explicit ``x_ip + x_jq <= 1`` row.

Variable names: ``x_i_p``, ``w_i_p_j_q``, ``y_i_0``/``y_i_1`` and ``z``.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .appgraph import AppGraph, GraphError, topsort_bfs
from .costs import CostTables, first_empty_choice
from .platform import Platform
from .timing import TimingModel

BINARY = "binary"
CONTINUOUS = "continuous"


class ModelError(ValueError):
    pass


class InfeasibleModelError(ModelError):
    pass


@dataclass
class Variable:
    id: int
    name: str
    kind: str
    lb: float = 0.0
    ub: float = math.inf


@dataclass
class Constraint:
    name: str
    coeffs: dict[int, float]
    sense: str  # "<=", "=", ">="
    rhs: float

    def activity(self, values: dict[int, float]) -> float:
        return sum(c * values.get(v, 0.0) for v, c in self.coeffs.items())

    def violation(self, values: dict[int, float]) -> float:
        act = self.activity(values)
        if self.sense == "<=":
            return max(0.0, act - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - act)
        return abs(act - self.rhs)


@dataclass
class MilpModel:
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    by_name: dict[str, int] = field(default_factory=dict)
    products: dict[tuple[int, int], int] = field(default_factory=dict)

    def add_var(self, name: str, kind: str = CONTINUOUS, lb: float = 0.0,
                ub: float = math.inf) -> int:
        if name in self.by_name:
            raise ModelError(f"duplicate variable name {name}")
        if kind == BINARY:
            lb, ub = 0.0, 1.0
        vid = len(self.variables)
        self.variables.append(Variable(vid, name, kind, lb, ub))
        self.by_name[name] = vid
        return vid

    def add_constraint(self, name: str, coeffs: dict[int, float], sense: str,
                       rhs: float) -> None:
        if sense not in ("<=", "=", ">="):
            raise ModelError(f"bad sense {sense}")
        for v, c in coeffs.items():
            if not 0 <= v < len(self.variables):
                raise ModelError(f"constraint {name} references unknown variable {v}")
            if not math.isfinite(c):
                raise ModelError(f"constraint {name} has a non-finite coefficient")
        self.constraints.append(Constraint(name, {v: c for v, c in coeffs.items() if c != 0},
                                           sense, rhs))

    def var(self, name: str) -> Variable:
        return self.variables[self.by_name[name]]

    def binaries(self) -> list[int]:
        return [v.id for v in self.variables if v.kind == BINARY]

    def objective_value(self, values: dict[int, float]) -> float:
        return sum(c * values.get(v, 0.0) for v, c in self.objective.items())

    def max_violation(self, values: dict[int, float]) -> tuple[float, Optional[str]]:
        worst, name = 0.0, None
        for v in self.variables:
            x = values.get(v.id, 0.0)
            viol = max(v.lb - x, x - v.ub, 0.0)
            if viol > worst:
                worst, name = viol, f"bounds of {v.name}"
        for c in self.constraints:
            viol = c.violation(values)
            if viol > worst:
                worst, name = viol, c.name
        return worst, name

    def copy(self) -> "MilpModel":
        return copy.deepcopy(self)


@dataclass
class BuildMaps:
    kind: str  # "device" or "time"
    x: dict[tuple[int, str], int] = field(default_factory=dict)
    w: dict[tuple[int, str, int, str], int] = field(default_factory=dict)
    y: dict[tuple[int, int], int] = field(default_factory=dict)
    z: int = -1
    order: Optional[list[int]] = None
    pairs: str = "all"
    streaming: bool = False
    big_m: float = 0.0


def mccormick(model: MilpModel, a: int, b: int, name: Optional[str] = None) -> int:
    """Continuous ``w`` in [0, 1] equal to ``a*b`` whenever both are binary."""
    for v in (a, b):
        if model.variables[v].kind != BINARY:
            raise ModelError(f"McCormick needs binary inputs; {model.variables[v].name} is not")
    key = (a, b) if a <= b else (b, a)
    if key in model.products:
        return model.products[key]
    name = name or f"w_{model.variables[a].name}_{model.variables[b].name}"
    w = model.add_var(name, CONTINUOUS, 0.0, 1.0)
    model.add_constraint(f"mc1_{name}", {w: 1.0, a: -1.0}, "<=", 0.0)
    model.add_constraint(f"mc2_{name}", {w: 1.0, b: -1.0}, "<=", 0.0)
    model.add_constraint(f"mc3_{name}", {w: 1.0, a: -1.0, b: -1.0}, ">=", -1.0)
    model.products[key] = w
    return w


def big_M(graph: AppGraph, timing: TimingModel,
          tables: Optional[CostTables] = None) -> float:
    """Sum of worst execution times plus worst finite transfer per edge."""
    tables = tables or CostTables(graph, timing.platform, timing)
    total = 0.0
    for k in range(tables.n):
        ts = tables.t[k, tables.choices[k]]
        if len(ts) == 0 or not all(math.isfinite(v) for v in ts):
            raise ModelError(f"node {tables.node_ids[k]} has no finite execution time")
        total += float(max(ts))
    for e, (a, b) in enumerate(tables.edges):
        vals = [tables.d[e, p, q] for p in tables.choices[a] for q in tables.choices[b]]
        finite = [v for v in vals if math.isfinite(v)]
        if not finite:
            raise ModelError(f"edge ({tables.node_ids[a]}, {tables.node_ids[b]}) has no finite transfer")
        total += max(finite)
    return total


def _prepare(graph: AppGraph, platform: Platform, timing: TimingModel,
             tables: Optional[CostTables]) -> CostTables:
    tables = tables or CostTables(graph, platform, timing)
    empty = first_empty_choice(tables)
    if empty is not None:
        raise InfeasibleModelError(f"node {empty} has no compatible unit")
    for k in range(tables.n):
        for u in tables.choices[k]:
            if not math.isfinite(tables.t[k, u]):
                raise ModelError(f"infinite execution time for node {tables.node_ids[k]} "
                                 f"on {tables.units[u]}")
    return tables


def _assignment_block(model: MilpModel, maps: BuildMaps, tables: CostTables) -> None:
    for k, nid in enumerate(tables.node_ids):
        for u in tables.choices[k]:
            uid = tables.units[u]
            maps.x[(nid, uid)] = model.add_var(f"x_{nid}_{uid}", BINARY)
    for k, nid in enumerate(tables.node_ids):
        model.add_constraint(f"assign_{nid}",
                             {maps.x[(nid, tables.units[u])]: 1.0 for u in tables.choices[k]},
                             "=", 1.0)
    for u in range(len(tables.units)):
        cap = tables.capacity[u]
        if not math.isfinite(cap):
            continue
        uid = tables.units[u]
        coeffs = {maps.x[(nid, uid)]: float(tables.area[k])
                  for k, nid in enumerate(tables.node_ids)
                  if (nid, uid) in maps.x and tables.area[k] > 0}
        model.add_constraint(f"cap_{uid}", coeffs, "<=", float(cap))


def _product(model: MilpModel, maps: BuildMaps, i: int, p: str, j: int, q: str) -> int:
    key = (i, p, j, q)
    if key not in maps.w:
        maps.w[key] = mccormick(model, maps.x[(i, p)], maps.x[(j, q)], f"w_{i}_{p}_{j}_{q}")
    return maps.w[key]


def _edge_terms(model: MilpModel, maps: BuildMaps, tables: CostTables, e: int,
                skip_pair=None) -> list[tuple[int, float, str, str]]:
    """(w var, transfer seconds, from unit, to unit) for every positive finite
    transfer on edge ``e``."""
    a, b = tables.edges[e]
    i, j = tables.node_ids[a], tables.node_ids[b]
    terms = []
    for p in tables.choices[a]:
        for q in tables.choices[b]:
            if skip_pair is not None and skip_pair(p, q):
                continue
            d = float(tables.d[e, p, q])
            pu, qu = tables.units[p], tables.units[q]
            if math.isinf(d):
                model.add_constraint(f"excl_{i}_{pu}_{j}_{qu}",
                                     {maps.x[(i, pu)]: 1.0, maps.x[(j, qu)]: 1.0}, "<=", 1.0)
            elif d > 0:
                terms.append((_product(model, maps, i, pu, j, qu), d, pu, qu))
    return terms


def build_device_based(graph: AppGraph, platform: Platform, timing: TimingModel,
                       tables: Optional[CostTables] = None) -> tuple[MilpModel, BuildMaps]:
    """Minimise the largest per-unit busy time (execution + transfers in and out)."""
    tables = _prepare(graph, platform, timing, tables)
    model, maps = MilpModel(), BuildMaps("device")
    _assignment_block(model, maps, tables)
    maps.z = model.add_var("z")
    load: dict[str, dict[int, float]] = {u: {} for u in tables.units}
    for k, nid in enumerate(tables.node_ids):
        for u in tables.choices[k]:
            uid = tables.units[u]
            if tables.t[k, u] > 0:
                load[uid][maps.x[(nid, uid)]] = float(tables.t[k, u])
    for e in range(len(tables.edges)):
        for w, d, p, q in _edge_terms(model, maps, tables, e):
            for uid in (p, q):
                load[uid][w] = load[uid].get(w, 0.0) + d
    for uid in tables.units:
        coeffs = {maps.z: 1.0}
        for v, c in load[uid].items():
            coeffs[v] = coeffs.get(v, 0.0) - c
        model.add_constraint(f"load_{uid}", coeffs, ">=", 0.0)
    model.objective = {maps.z: 1.0}
    return model, maps


def _reachability(tables: CostTables) -> list[set[int]]:
    succ: list[list[int]] = [[] for _ in range(tables.n)]
    for a, b in tables.edges:
        succ[a].append(b)
    reach: list[set[int]] = [set() for _ in range(tables.n)]
    for a in range(tables.n):
        stack = list(succ[a])
        while stack:
            v = stack.pop()
            if v not in reach[a]:
                reach[a].add(v)
                stack.extend(succ[v])
    return reach


def build_time_based(graph: AppGraph, platform: Platform, timing: TimingModel,
                     order: Optional[Sequence[int]] = None, pairs: str = "all",
                     tables: Optional[CostTables] = None) -> tuple[MilpModel, BuildMaps]:
    """Start/end time per node, precedence with transfers, and big-M
    serialisation of nodes sharing a unit in the given topological order.

    ``pairs="path-pruned"`` skips ordering rows for node pairs already joined
    by a directed path; edge rows imply those orderings since transfers are
    nonnegative.
    """
    if pairs not in ("all", "path-pruned"):
        raise ModelError(f"unknown pairs mode {pairs!r}")
    tables = _prepare(graph, platform, timing, tables)
    order = list(order) if order is not None else topsort_bfs(graph)
    order_pos = tables.order_positions(order)
    M = big_M(graph, timing, tables)

    model, maps = MilpModel(), BuildMaps("time", order=list(order), pairs=pairs, big_m=M)
    _assignment_block(model, maps, tables)
    maps.z = model.add_var("z")
    for nid in tables.node_ids:
        maps.y[(nid, 0)] = model.add_var(f"y_{nid}_0")
        maps.y[(nid, 1)] = model.add_var(f"y_{nid}_1")
    for k, nid in enumerate(tables.node_ids):
        model.add_constraint(f"mk_{nid}", {maps.z: 1.0, maps.y[(nid, 1)]: -1.0}, ">=", 0.0)
        coeffs = {maps.y[(nid, 1)]: 1.0, maps.y[(nid, 0)]: -1.0}
        for u in tables.choices[k]:
            t = float(tables.t[k, u])
            if t > 0:
                coeffs[maps.x[(nid, tables.units[u])]] = -t
        model.add_constraint(f"dur_{nid}", coeffs, ">=", 0.0)
    for e in range(len(tables.edges)):
        _add_precedence(model, maps, tables, e)

    reach = _reachability(tables) if pairs == "path-pruned" else None
    for ja, j in enumerate(order_pos):
        for i in order_pos[:ja]:
            if reach is not None and j in reach[i]:
                continue
            _add_ordering(model, maps, tables, i, j, M)
    model.objective = {maps.z: 1.0}
    return model, maps


def _add_precedence(model: MilpModel, maps: BuildMaps, tables: CostTables, e: int) -> None:
    a, b = tables.edges[e]
    i, j = tables.node_ids[a], tables.node_ids[b]
    coeffs = {maps.y[(j, 0)]: 1.0, maps.y[(i, 1)]: -1.0}
    for w, d, _, _ in _edge_terms(model, maps, tables, e):
        coeffs[w] = coeffs.get(w, 0.0) - d
    model.add_constraint(f"prec_{i}_{j}", coeffs, ">=", 0.0)


def _add_ordering(model: MilpModel, maps: BuildMaps, tables: CostTables,
                  a: int, b: int, M: float, skip_units=None) -> None:
    i, j = tables.node_ids[a], tables.node_ids[b]
    for u in sorted(set(tables.choices[a]) & set(tables.choices[b])):
        if skip_units is not None and skip_units[u]:
            continue
        uid = tables.units[u]
        w = _product(model, maps, i, uid, j, uid)
        model.add_constraint(f"ord_{i}_{j}_{uid}",
                             {maps.y[(j, 0)]: 1.0, maps.y[(i, 1)]: -1.0, w: -M}, ">=", -M)


def add_streaming_extension(model: MilpModel, maps: BuildMaps, graph: AppGraph,
                            platform: Platform, timing: TimingModel,
                            tables: Optional[CostTables] = None) -> tuple[MilpModel, BuildMaps]:
    """Pipelining between dataflow units and their memories.

    For an edge whose endpoints both sit in one dataflow group (device plus
    associated memories) the child may start as soon as the parent starts,
    and no child ends before its parent.  Units of such groups hold tasks
    side by side in area, so their serialisation rows are dropped; area is
    bounded by the capacity rows instead.
    """
    if maps.kind != "time":
        raise ModelError("the streaming extension applies to time-based models only")
    if maps.streaming:
        return model, maps
    tables = tables or CostTables(graph, platform, timing)
    M = maps.big_m
    out = model.copy()
    new_maps = copy.deepcopy(maps)
    new_maps.streaming = True
    stream_units = {tables.units[u] for u in range(len(tables.units)) if tables.stream_unit[u]}

    keep = []
    for c in out.constraints:
        if c.name.startswith("prec_"):
            continue
        if c.name.startswith("ord_") and c.name.split("_", 3)[3] in stream_units:
            continue
        keep.append(c)
    out.constraints = keep

    for e in range(len(tables.edges)):
        a, b = tables.edges[e]
        i, j = tables.node_ids[a], tables.node_ids[b]
        yj0, yi0 = new_maps.y[(j, 0)], new_maps.y[(i, 0)]
        yj1, yi1 = new_maps.y[(j, 1)], new_maps.y[(i, 1)]
        coeffs = {yj0: 1.0, yi1: -1.0}
        for w, d, _, _ in _edge_terms(out, new_maps, tables, e,
                                skip_pair=lambda p, q: tables.stream_pair[p, q]):
            coeffs[w] = coeffs.get(w, 0.0) - d
        relaxed = False
        for p in tables.choices[a]:
            for q in tables.choices[b]:
                if tables.stream_pair[p, q]:
                    w = _product(out, new_maps, i, tables.units[p], j, tables.units[q])
                    coeffs[w] = coeffs.get(w, 0.0) + M
                    relaxed = True
        out.add_constraint(f"prec_{i}_{j}", coeffs, ">=", 0.0)
        if relaxed:
            out.add_constraint(f"sprec_{i}_{j}", {yj0: 1.0, yi0: -1.0}, ">=", 0.0)
        out.add_constraint(f"pend_{i}_{j}", {yj1: 1.0, yi1: -1.0}, ">=", 0.0)
    return out, new_maps


def build_formulation(graph: AppGraph, platform: Platform, timing: TimingModel,
                      kind: str, order: Optional[Sequence[int]] = None,
                      streaming: bool = False, pairs: str = "all",
                      tables: Optional[CostTables] = None) -> tuple[MilpModel, BuildMaps]:
    tables = tables or CostTables(graph, platform, timing)
    if kind == "device":
        if streaming:
            raise ModelError("the streaming extension applies to time-based models only")
        return build_device_based(graph, platform, timing, tables)
    if kind != "time":
        raise ModelError(f"unknown formulation {kind!r}")
    model, maps = build_time_based(graph, platform, timing, order, pairs, tables)
    if streaming:
        model, maps = add_streaming_extension(model, maps, graph, platform, timing, tables)
    return model, maps


def extract_mapping(values: dict[int, float], maps: BuildMaps,
                    tol: float = 1e-6) -> dict[int, str]:
    """Read the unit chosen for each node off the (near-)integral x values."""
    chosen: dict[int, list[str]] = {}
    for (nid, uid), vid in maps.x.items():
        v = values.get(vid, 0.0)
        chosen.setdefault(nid, [])
        if abs(v - 1.0) <= tol:
            chosen[nid].append(uid)
        elif abs(v) > tol:
            raise ModelError(f"fractional assignment for node {nid}: x_{nid}_{uid} = {v}")
    out = {}
    for nid, units in sorted(chosen.items()):
        if len(units) != 1:
            raise ModelError(f"node {nid} assigned to {len(units)} units")
        out[nid] = units[0]
    return out


def values_for_assignment(model: MilpModel, maps: BuildMaps, tables: CostTables,
                          row, objective: float, y0=None, y1=None) -> dict[int, float]:
    """A complete point of ``model`` for one assignment (x, products, y, z)."""
    mapping = tables.decode(row)
    vals = {v.id: 0.0 for v in model.variables}
    for (nid, uid), vid in maps.x.items():
        vals[vid] = 1.0 if mapping[nid] == uid else 0.0
    for (i, p, j, q), vid in maps.w.items():
        vals[vid] = 1.0 if mapping[i] == p and mapping[j] == q else 0.0
    if maps.y and y0 is not None:
        for k, nid in enumerate(tables.node_ids):
            vals[maps.y[(nid, 0)]] = float(y0[k])
            vals[maps.y[(nid, 1)]] = float(y1[k])
    vals[maps.z] = float(objective)
    return vals


def check_order(graph: AppGraph, order: Sequence[int]) -> None:
    rank = {n: k for k, n in enumerate(order)}
    if sorted(rank) != sorted(graph.nodes):
        raise GraphError("order must list every node exactly once")
    for a, b in graph.edges:
        if rank[a] >= rank[b]:
            raise GraphError(f"order is not topological: edge ({a}, {b})")
