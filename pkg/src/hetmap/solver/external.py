"""Routes to solvers outside this package: HiGHS through scipy, or any command line."""

from __future__ import annotations

import math
import shlex
import subprocess
import tempfile
import time
from pathlib import Path

import numpy as np

from ..milp import BINARY, MilpModel
from .bnb import FEASIBLE, INFEASIBLE, OPTIMAL, TIME_LIMIT, Solution, SolverOptions
from .lpfile import export_lp, import_solution


class ExternalSolverError(RuntimeError):
    pass


def solve_highs(model: MilpModel, options: SolverOptions = SolverOptions()) -> Solution:
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import coo_array

    t0 = time.perf_counter()
    nv, m = len(model.variables), len(model.constraints)
    rows, cols, vals = [], [], []
    lo = np.full(m, -np.inf)
    hi = np.full(m, np.inf)
    for r, con in enumerate(model.constraints):
        for v, c in con.coeffs.items():
            rows.append(r)
            cols.append(v)
            vals.append(c)
        if con.sense in ("<=", "="):
            hi[r] = con.rhs
        if con.sense in (">=", "="):
            lo[r] = con.rhs
    A = coo_array((vals, (rows, cols)), shape=(m, nv)).tocsr()
    c = np.zeros(nv)
    for v, coef in model.objective.items():
        c[v] = coef
    integrality = np.array([1 if v.kind == BINARY else 0 for v in model.variables])
    bounds = Bounds([v.lb for v in model.variables], [v.ub for v in model.variables])
    res = milp(c, integrality=integrality, bounds=bounds,
               constraints=[LinearConstraint(A, lo, hi)] if m else None,
               options={"time_limit": options.time_limit, "mip_rel_gap": options.gap})
    stats = {"nodes": int(getattr(res, "mip_node_count", 0) or 0),
             "wall_time": time.perf_counter() - t0, "backend": "highs"}
    bound = getattr(res, "mip_dual_bound", None)
    if res.x is None:
        status = TIME_LIMIT if res.status == 1 else INFEASIBLE
        return Solution(status, math.inf, -math.inf if bound is None else bound, {}, stats)
    values = {k: float(x) for k, x in enumerate(res.x)}
    for v in model.variables:  # snap binaries so extraction is exact
        if v.kind == BINARY:
            values[v.id] = float(round(values[v.id]))
    obj = float(res.fun)
    if res.status == 0:
        return Solution(OPTIMAL, obj, obj if bound is None else min(bound, obj), values, stats)
    return Solution(TIME_LIMIT if res.status == 1 else FEASIBLE, obj,
                    -math.inf if bound is None else bound, values, stats)


def solve_command(model: MilpModel, template: str,
                  options: SolverOptions = SolverOptions()) -> Solution:
    """Run ``template`` with ``{lp}`` and ``{sol}`` filled in, then read the listing."""
    if "{lp}" not in template or "{sol}" not in template:
        raise ExternalSolverError("solver command must contain {lp} and {sol}")
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix="hetmap-") as tmp:
        lp, sol = Path(tmp) / "model.lp", Path(tmp) / "model.sol"
        export_lp(model, lp)
        cmd = template.format(lp=shlex.quote(str(lp)), sol=shlex.quote(str(sol)))
        try:
            proc = subprocess.run(cmd, shell=True, capture_output=True, text=True,
                                  timeout=options.time_limit + 30)
        except subprocess.TimeoutExpired:
            return Solution(TIME_LIMIT, math.inf, -math.inf, {},
                            {"nodes": 0, "wall_time": time.perf_counter() - t0})
        if proc.returncode != 0 or not sol.exists():
            raise ExternalSolverError(f"solver command failed ({proc.returncode}): "
                                      f"{proc.stderr.strip()[:500]}")
        solution = import_solution(sol, model)
    solution.stats["wall_time"] = time.perf_counter() - t0
    solution.stats["backend"] = "external"
    return solution
