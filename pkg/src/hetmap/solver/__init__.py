"""Solvers for the mapping MILPs and a high-level ``solve`` entry point."""

from __future__ import annotations

import time

from ..appgraph import AppGraph
from ..costs import CostTables
from ..milp import ModelError, extract_mapping, values_for_assignment
from ..platform import Platform
from ..timing import TimingModel
from .bnb import (FEASIBLE, INFEASIBLE, OPTIMAL, TIME_LIMIT, Solution, SolverOptions,
                  solve_bnb, solve_lp, standard_form)
from .exhaustive import (BudgetExceeded, Formulation, objectives, schedule_from_assignment,
                         solve_exhaustive)
from .external import ExternalSolverError, solve_command, solve_highs
from .local import LocalOptions, improve_local
from .lpfile import LPParseError, export_lp, import_solution, read_lp, write_lp, write_solution
from .repair import make_repair


def solve(graph: AppGraph, platform: Platform, timing: TimingModel,
          formulation: Formulation, options: SolverOptions = SolverOptions()
          ) -> tuple[Solution, dict[int, str]]:
    """Solve ``formulation`` with the backend named by ``options.mode``.

    The mapping is empty when no integral point was found.
    """
    if options.mode == "exhaustive":
        return solve_exhaustive(graph, platform, timing, formulation, options.budget)
    t0 = time.perf_counter()
    tables = CostTables(graph, platform, timing)
    model, maps = formulation.build(graph, platform, timing, tables)
    if options.mode == "bnb":
        sol = solve_bnb(model, options, make_repair(model, maps, tables))
    elif options.mode == "highs":
        sol = solve_highs(model, options)
    else:
        if not options.external_cmd:
            raise ExternalSolverError("external mode needs a solver command")
        sol = solve_command(model, options.external_cmd, options)
    mapping = extract_mapping(sol.values, maps) if sol.values and sol.status != INFEASIBLE else {}
    if mapping:
        # re-price the assignment exactly; big-M slack within the integrality
        # tolerance must not leak into the reported objective
        row = tables.encode(mapping)
        order_pos = tables.order_positions(maps.order) if maps.kind == "time" else None
        obj, y0, y1 = objectives(tables, row[None, :], formulation, order_pos)
        sol.objective = float(obj[0])
        sol.values = values_for_assignment(model, maps, tables, row, sol.objective,
                                           None if y0 is None else y0[0],
                                           None if y1 is None else y1[0])
        sol.best_bound = min(sol.best_bound, sol.objective)
    sol.stats["wall_time"] = time.perf_counter() - t0
    return sol, mapping


__all__ = [
    "FEASIBLE", "INFEASIBLE", "OPTIMAL", "TIME_LIMIT", "Solution", "SolverOptions",
    "solve_bnb", "solve_lp", "standard_form", "BudgetExceeded", "Formulation",
    "schedule_from_assignment", "solve_exhaustive", "ExternalSolverError", "solve_command",
    "solve_highs", "LocalOptions", "improve_local", "LPParseError", "export_lp",
    "import_solution", "read_lp", "write_lp", "write_solution", "make_repair", "solve",
    "ModelError",
]
