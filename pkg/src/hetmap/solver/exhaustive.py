"""Exact solving by enumerating every compatible assignment."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..appgraph import AppGraph, topsort_bfs
from ..costs import CostTables, enumerate_assignments, first_empty_choice, space_size
from ..milp import (BuildMaps, InfeasibleModelError, MilpModel, ModelError,
                    build_formulation, values_for_assignment)
from ..platform import Platform
from ..timing import TimingModel
from .bnb import INFEASIBLE, OPTIMAL, Solution

DEFAULT_BUDGET = 10_000_000
CHUNK = 1 << 15


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Formulation:
    kind: str  # "device" or "time"
    order: Optional[tuple[int, ...]] = None
    streaming: bool = False
    pairs: str = "all"

    @classmethod
    def parse(cls, text: str, order: Optional[Sequence[int]] = None,
              pairs: str = "all") -> "Formulation":
        """``device``, ``time`` or ``time+streaming``."""
        parts = text.split("+")
        kind, flags = parts[0], set(parts[1:])
        if kind not in ("device", "time") or not flags <= {"streaming"}:
            raise ValueError(f"unknown formulation {text!r}")
        if kind == "device" and flags:
            raise ValueError("streaming applies to the time-based formulation only")
        return cls(kind, tuple(order) if order is not None else None,
                   "streaming" in flags, pairs)

    @property
    def label(self) -> str:
        return self.kind + ("+streaming" if self.streaming else "")

    def resolved_order(self, graph: AppGraph) -> list[int]:
        return list(self.order) if self.order is not None else topsort_bfs(graph)

    def build(self, graph: AppGraph, platform: Platform, timing: TimingModel,
              tables: Optional[CostTables] = None) -> tuple[MilpModel, BuildMaps]:
        order = self.resolved_order(graph) if self.kind == "time" else None
        return build_formulation(graph, platform, timing, self.kind, order,
                                 self.streaming, self.pairs, tables)


def objectives(tables: CostTables, A: np.ndarray, form: Formulation,
               order_pos: Optional[list[int]] = None):
    """Objective per assignment row, plus (y0, y1) for time formulations."""
    if form.kind == "device":
        return tables.device_objective(A), None, None
    z, y0, y1 = tables.schedule(A, order_pos, form.streaming)
    return z, y0, y1


def schedule_from_assignment(graph: AppGraph, assignment: dict[int, str],
                             order: Optional[Sequence[int]], timing: TimingModel,
                             streaming: bool = False
                             ) -> tuple[float, dict[tuple[int, int], float]]:
    """Earliest start/end of every node for a fixed assignment; returns
    ``(z, {(node, 0): start, (node, 1): end})``."""
    tables = CostTables(graph, timing.platform, timing)
    for nid in tables.node_ids:
        unit = assignment.get(nid)
        if unit not in tables.upos or not tables.compat[tables.pos[nid], tables.upos[unit]]:
            raise ModelError(f"node {nid} is not assigned to a compatible unit")
    order = list(order) if order is not None else topsort_bfs(graph)
    order_pos = tables.order_positions(order)
    z, y0, y1 = tables.schedule(tables.encode(assignment)[None, :], order_pos, streaming)
    ys = {}
    for k, nid in enumerate(tables.node_ids):
        ys[(nid, 0)] = float(y0[0, k])
        ys[(nid, 1)] = float(y1[0, k])
    return float(z[0]), ys


def solve_exhaustive(graph: AppGraph, platform: Platform, timing: TimingModel,
                     formulation: Formulation, budget: int = DEFAULT_BUDGET,
                     model: Optional[tuple[MilpModel, BuildMaps]] = None,
                     with_values: bool = True) -> tuple[Solution, dict[int, str]]:
    """Minimum over all capacity-feasible assignments; first (lexicographically
    smallest) assignment wins ties.

    With ``with_values`` the returned Solution carries a full point of the
    formulation's model (built on demand unless ``model`` is given).
    """
    t0 = time.perf_counter()
    tables = CostTables(graph, platform, timing)
    empty = first_empty_choice(tables)
    if empty is not None:
        raise InfeasibleModelError(f"node {empty} has no compatible unit")
    size = space_size(tables)
    if size > budget:
        raise BudgetExceeded(f"{size} assignments exceed the enumeration budget of {budget}; "
                             "use the bnb mode or an external solver")
    order_pos = None
    if formulation.kind == "time":
        order_pos = tables.order_positions(formulation.resolved_order(graph))

    best, best_row = math.inf, None
    for start in range(0, size, CHUNK):
        A = enumerate_assignments(tables, start, min(size, start + CHUNK))
        obj, _, _ = objectives(tables, A, formulation, order_pos)
        obj = np.where(tables.capacity_ok(A), obj, math.inf)
        k = int(np.argmin(obj))
        if obj[k] < best:
            best, best_row = float(obj[k]), A[k]
    stats = {"nodes": size, "wall_time": 0.0}
    if best_row is None or not math.isfinite(best):
        stats["wall_time"] = time.perf_counter() - t0
        return Solution(INFEASIBLE, math.inf, math.inf, {}, stats), {}

    mapping = tables.decode(best_row)
    values: dict[int, float] = {}
    if with_values:
        m, maps = model or formulation.build(graph, platform, timing, tables)
        _, y0, y1 = objectives(tables, best_row[None, :], formulation, order_pos)
        values = values_for_assignment(m, maps, tables, best_row, best,
                                       None if y0 is None else y0[0],
                                       None if y1 is None else y1[0])
    stats["wall_time"] = time.perf_counter() - t0
    return Solution(OPTIMAL, best, best, values, stats), mapping
