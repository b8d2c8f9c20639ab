"""Best-first LP-based branch and bound over the binary variables of a MilpModel."""

from __future__ import annotations

import heapq
import math
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..milp import BINARY, MilpModel
from .simplex import BoundedSimplex, LPResult

INT_TOL = 1e-6
BINV_CACHE_BYTES = 200_000_000

OPTIMAL = "Optimal"
FEASIBLE = "Feasible"
INFEASIBLE = "Infeasible"
TIME_LIMIT = "TimeLimit"


@dataclass
class Solution:
    status: str
    objective: float
    best_bound: float
    values: dict[int, float] = field(default_factory=dict)
    stats: dict = field(default_factory=dict)


@dataclass
class SolverOptions:
    time_limit: float = 60.0
    gap: float = 1e-6
    mode: str = "exhaustive"  # exhaustive | bnb | highs | external
    budget: int = 10_000_000
    external_cmd: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        if self.mode not in ("exhaustive", "bnb", "highs", "external"):
            raise ValueError(f"unknown solver mode {self.mode!r}")


@dataclass
class StandardForm:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    nvars: int


def standard_form(model: MilpModel) -> StandardForm:
    """``A x + s = b`` with one slack per row; slack bounds encode the row sense."""
    nv, m = len(model.variables), len(model.constraints)
    A = np.zeros((m, nv + m))
    b = np.zeros(m)
    lo = np.zeros(nv + m)
    hi = np.zeros(nv + m)
    for v in model.variables:
        lo[v.id], hi[v.id] = v.lb, v.ub
    for r, con in enumerate(model.constraints):
        for v, coef in con.coeffs.items():
            A[r, v] = coef
        A[r, nv + r] = 1.0
        b[r] = con.rhs
        if con.sense == "<=":
            lo[nv + r], hi[nv + r] = 0.0, math.inf
        elif con.sense == ">=":
            lo[nv + r], hi[nv + r] = -math.inf, 0.0
    c = np.zeros(nv + m)
    for v, coef in model.objective.items():
        c[v] = coef
    return StandardForm(A, b, c, lo, hi, nv)


def solve_lp(model: MilpModel, fixed: Optional[dict[int, float]] = None) -> LPResult:
    """LP relaxation of ``model`` with optional variables fixed to values."""
    sf = standard_form(model)
    lo, hi = sf.lo.copy(), sf.hi.copy()
    for v, val in (fixed or {}).items():
        lo[v] = hi[v] = val
    res = BoundedSimplex(sf.A, sf.b, sf.c, lo, hi).solve()
    if res.x is not None:
        res.x = res.x[:sf.nvars]
    return res


Repair = Callable[[dict[int, float]], Optional[tuple[float, dict[int, float]]]]


def solve_bnb(model: MilpModel, options: SolverOptions = SolverOptions(),
              repair: Optional[Repair] = None) -> Solution:
    """Branch on the most fractional binary; bounds from the LP relaxation.

    ``repair`` turns a fractional LP point into a feasible integral one (or
    None); it supplies incumbents long before the tree closes.
    """
    t0 = time.perf_counter()
    sf = standard_form(model)
    nv = sf.nvars
    binaries = [v.id for v in model.variables if v.kind == BINARY]
    gap = options.gap

    incumbent = math.inf
    inc_values: dict[int, float] = {}
    nodes = 0
    lp_iters = 0

    # basis inverses of queued nodes, oldest evicted first
    binv_cache: OrderedDict[int, np.ndarray] = OrderedDict()
    cache_slots = max(8, BINV_CACHE_BYTES // max(1, 8 * len(sf.b) ** 2))

    def lp(fix: dict[int, float], parent: Optional[LPResult], binv=None) -> LPResult:
        lo, hi = sf.lo.copy(), sf.hi.copy()
        for v, val in fix.items():
            lo[v] = hi[v] = val
        solver = BoundedSimplex(sf.A, sf.b, sf.c, lo, hi)
        if parent is not None and parent.basis is not None:
            return solver.solve_dual(parent.basis, parent.state, binv)
        return solver.solve()

    def remember(key: int, res: LPResult) -> None:
        if res.binv is not None:
            binv_cache[key] = res.binv
            res.binv = None
            while len(binv_cache) > cache_slots:
                binv_cache.popitem(last=False)

    def cutoff() -> float:
        if math.isinf(incumbent):
            return math.inf
        return incumbent - gap * max(1.0, abs(incumbent))

    def consider(obj: float, vals: dict[int, float]) -> None:
        nonlocal incumbent, inc_values
        if obj < incumbent - 1e-12:
            incumbent, inc_values = obj, vals

    def done(status: str, bound: float) -> Solution:
        if not inc_values and status != TIME_LIMIT:
            status = INFEASIBLE
        return Solution(status, incumbent, min(bound, incumbent), inc_values,
                        {"nodes": nodes, "lp_iterations": lp_iters,
                         "wall_time": time.perf_counter() - t0})

    root = lp({}, None)
    lp_iters += root.iterations
    nodes += 1
    if root.status == "infeasible":
        return done(INFEASIBLE, math.inf)
    if root.status != "optimal":
        return Solution(INFEASIBLE if root.status != "unbounded" else "Unbounded",
                        math.inf, -math.inf, {}, {"nodes": nodes, "lp_status": root.status,
                                                   "wall_time": time.perf_counter() - t0})
    heap: list = []
    seq = 0
    remember(seq, root)
    heapq.heappush(heap, (root.objective, seq, {}, root))
    while heap:
        bound = heap[0][0]
        if bound >= cutoff():
            return done(OPTIMAL, bound)
        if time.perf_counter() - t0 > options.time_limit:
            return done(TIME_LIMIT, bound)
        bnd, key, fix, res = heapq.heappop(heap)
        binv = binv_cache.pop(key, None)
        if bnd >= cutoff():
            continue
        x = res.x
        vals = {v: float(x[v]) for v in range(nv)}
        frac_var, frac_score = -1, -1.0
        for v in binaries:
            f = abs(x[v] - round(x[v]))
            if f > INT_TOL:
                score = 0.5 - abs(x[v] - math.floor(x[v]) - 0.5)
                if score > frac_score + 1e-12:
                    frac_var, frac_score = v, score
        if frac_var < 0:
            # integral within tolerance; with big-M rows that slack can still
            # hide a better-looking z, so price the rounded assignment exactly
            exact_fix = dict(fix)
            exact_fix.update({v: float(round(x[v])) for v in binaries})
            exact = lp(exact_fix, res, binv)
            lp_iters += exact.iterations
            if exact.status == "optimal":
                consider(exact.objective, {v: float(exact.x[v]) for v in range(nv)})
                if exact.objective <= bnd + gap * max(1.0, abs(exact.objective)):
                    continue
            frac_var = max(binaries, key=lambda v: (abs(x[v] - round(x[v])), -v))
            if abs(x[frac_var] - round(x[frac_var])) == 0.0:
                continue
        elif repair is not None:
            fixed = repair(vals)
            if fixed is not None:
                consider(*fixed)
        for val in (0.0, 1.0):
            child_fix = dict(fix)
            child_fix[frac_var] = val
            child = lp(child_fix, res, binv)
            nodes += 1
            lp_iters += child.iterations
            if child.status != "optimal":
                continue
            if child.objective >= cutoff():
                continue
            seq += 1
            remember(seq, child)
            heapq.heappush(heap, (child.objective, seq, child_fix, child))
    return done(OPTIMAL, incumbent)
