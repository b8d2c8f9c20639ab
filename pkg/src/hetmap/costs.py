"""Dense cost tables and batch evaluation of the two MILP objectives.

Rows index graph nodes (sorted by id), columns index platform units.  The
batch routines take an ``(N, n)`` array of unit indices, one assignment per
row, so that enumeration and cross-checks run vectorised.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .appgraph import AppGraph, GraphError
from .platform import Platform
from .timing import TimingModel


class CostTables:
    def __init__(self, graph: AppGraph, platform: Platform, timing: TimingModel):
        self.graph = graph
        self.platform = platform
        self.node_ids = sorted(graph.nodes)
        self.units = platform.unit_ids
        self.pos = {nid: k for k, nid in enumerate(self.node_ids)}
        self.upos = {u: k for k, u in enumerate(self.units)}
        n, U = len(self.node_ids), len(self.units)

        self.compat = np.zeros((n, U), dtype=bool)
        self.t = np.full((n, U), math.inf)
        for k, nid in enumerate(self.node_ids):
            node = graph.nodes[nid]
            for u, uid in enumerate(self.units):
                if timing.compatible(node, uid):
                    self.compat[k, u] = True
                    self.t[k, u] = timing.exec_time(node, uid)
        self.choices = [list(np.flatnonzero(self.compat[k])) for k in range(n)]

        self.edges = np.array([(self.pos[a], self.pos[b]) for a, b in graph.edges],
                              dtype=int).reshape(-1, 2)
        self.d = np.full((len(self.edges), U, U), math.inf)
        for e, (a, b) in enumerate(graph.edges):
            node = graph.nodes[a]
            for p in self.choices[self.pos[a]]:
                for q in self.choices[self.pos[b]]:
                    self.d[e, p, q] = timing.transport_time(node, self.units[p], self.units[q])
        self.parents: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for e, (a, b) in enumerate(self.edges):
            self.parents[b].append((e, a))

        self.area = np.array([graph.nodes[nid].attrs.area if graph.nodes[nid].attrs else 0.0
                              for nid in self.node_ids])
        self.capacity = np.full(U, math.inf)
        for dev in platform.dataflow_units():
            self.capacity[self.upos[dev.id]] = dev.area_capacity
        # units taking part in pipelined streaming: dataflow devices and their memories
        self.stream_unit = np.zeros(U, dtype=bool)
        self.stream_pair = np.zeros((U, U), dtype=bool)
        for dev in platform.dataflow_units():
            group = [self.upos[dev.id]] + [self.upos[m] for m in sorted(platform.assoc[dev.id])]
            self.stream_unit[group] = True
            for a in group:
                for b in group:
                    self.stream_pair[a, b] = True

    @property
    def n(self) -> int:
        return len(self.node_ids)

    def order_positions(self, order: Sequence[int]) -> list[int]:
        """Translate a node-id order to row indices, checking it is topological."""
        if sorted(order) != self.node_ids:
            raise GraphError("order must list every node exactly once")
        rank = {nid: k for k, nid in enumerate(order)}
        for a, b in self.graph.edges:
            if rank[a] >= rank[b]:
                raise GraphError(f"order is not topological: edge ({a}, {b})")
        return [self.pos[nid] for nid in order]

    def encode(self, mapping: dict[int, str]) -> np.ndarray:
        return np.array([self.upos[mapping[nid]] for nid in self.node_ids], dtype=int)

    def decode(self, row: np.ndarray) -> dict[int, str]:
        return {nid: self.units[int(u)] for nid, u in zip(self.node_ids, row)}

    # -- feasibility ------------------------------------------------------------

    def capacity_ok(self, A: np.ndarray) -> np.ndarray:
        ok = np.ones(len(A), dtype=bool)
        for u in np.flatnonzero(np.isfinite(self.capacity)):
            used = ((A == u) * self.area).sum(axis=1)
            ok &= used <= self.capacity[u] + 1e-9
        return ok

    # -- device-based objective ----------------------------------------------------

    def device_loads(self, A: np.ndarray) -> np.ndarray:
        """Per-unit busy time (execution plus transfers in and out), shape (N, U)."""
        N = len(A)
        rows = np.arange(N)
        loads = np.zeros((N, len(self.units)))
        for k in range(self.n):
            np.add.at(loads, (rows, A[:, k]), self.t[k, A[:, k]])
        for e, (a, b) in enumerate(self.edges):
            dd = self.d[e, A[:, a], A[:, b]]
            np.add.at(loads, (rows, A[:, a]), dd)
            np.add.at(loads, (rows, A[:, b]), np.where(A[:, a] == A[:, b], 0.0, dd))
        return loads

    def device_objective(self, A: np.ndarray) -> np.ndarray:
        if self.n == 0:
            return np.zeros(len(A))
        return self.device_loads(A).max(axis=1)

    # -- time-based objective --------------------------------------------------------

    def schedule(self, A: np.ndarray, order_pos: Sequence[int],
                 streaming: bool = False) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Earliest start/end times for every node under each assignment row.

        Returns ``(z, y0, y1)``; ``z`` is +inf for assignments that use an
        infinite transfer.
        """
        N = len(A)
        rows = np.arange(N)
        y0 = np.zeros((N, self.n))
        y1 = np.zeros((N, self.n))
        last_end = np.zeros((N, len(self.units)))
        for j in order_pos:
            aj = A[:, j]
            start = np.zeros(N)
            parent_end = np.zeros(N)
            for e, i in self.parents[j]:
                ai = A[:, i]
                via_edge = y1[:, i] + self.d[e, ai, aj]
                if streaming:
                    via_edge = np.where(self.stream_pair[ai, aj], y0[:, i], via_edge)
                    parent_end = np.maximum(parent_end, y1[:, i])
                start = np.maximum(start, via_edge)
            busy = last_end[rows, aj]
            if streaming:
                busy = np.where(self.stream_unit[aj], 0.0, busy)
            start = np.maximum(start, busy)
            end = start + self.t[j, aj]
            if streaming:
                end = np.maximum(end, parent_end)
            y0[:, j] = start
            y1[:, j] = end
            last_end[rows, aj] = np.maximum(last_end[rows, aj], end)
        z = y1.max(axis=1) if self.n else np.zeros(N)
        return z, y0, y1


def enumerate_assignments(tables: CostTables, start: int, stop: int) -> np.ndarray:
    """Rows ``start..stop-1`` of the lexicographic product of compatible units."""
    codes = np.arange(start, stop, dtype=np.int64)
    out = np.empty((len(codes), tables.n), dtype=np.int64)
    for k in range(tables.n - 1, -1, -1):
        radix = len(tables.choices[k])
        out[:, k] = np.asarray(tables.choices[k])[codes % radix]
        codes //= radix
    return out


def space_size(tables: CostTables) -> int:
    size = 1
    for c in tables.choices:
        size *= len(c)
    return size


def first_empty_choice(tables: CostTables) -> Optional[int]:
    for k, c in enumerate(tables.choices):
        if not c:
            return tables.node_ids[k]
    return None
