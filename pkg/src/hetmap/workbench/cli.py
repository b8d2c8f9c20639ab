"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 bad input data, 3 infeasible or
over budget.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..appgraph import (GraphError, NodeKind, constant_complexity_sampler, default_sampler,
                        expand_tasks, gen_series_parallel, topsort_bfs)
from ..evaluator import EvalOptions, EvaluationError, Timeline, evaluate
from ..milp import InfeasibleModelError, ModelError
from ..platform import PlatformError
from ..solver import (INFEASIBLE, BudgetExceeded, ExternalSolverError, Formulation,
                      LPParseError, SolverOptions, export_lp, solve)
from ..timing import TimingError, TimingModel, pin_nodes
from .experiment import ExperimentConfig, run_experiment
from .io import (DataError, baseline_units, dumps, load_graph, load_mapping,
                 load_platform, mapping_to_json, read_json, save_graphs, write_json)
from .render import render_dot, render_gantt

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3
SOLVER_ENV = "HETMAP_EXTERNAL_SOLVER"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 by default
        raise UsageError(message)


def _timing(args, graph, platform) -> TimingModel:
    timing = TimingModel(platform)
    if args.pin_io:
        _, ram = baseline_units(platform)
        timing = pin_nodes(timing, {n: ram for n in graph.of_kind(NodeKind.SOURCE, NodeKind.SINK)})
    return timing


def _emit(text: str, output: Optional[str]) -> None:
    if output and output != "-":
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


# -- subcommands -------------------------------------------------------------------


def cmd_gen(args) -> int:
    sampler = default_sampler if args.complexity is None else constant_complexity_sampler(args.complexity)
    graphs = []
    for k in range(args.count):
        seed = args.seed + k
        graphs.append(expand_tasks(gen_series_parallel(args.edges, seed), sampler,
                                   args.source_bytes, seed=seed, fixed_load=args.fixed_load))
    if args.output and args.output != "-":
        save_graphs(args.output, graphs)
    else:
        data = graphs[0].to_dict() if len(graphs) == 1 else [g.to_dict() for g in graphs]
        sys.stdout.write(dumps(data))
    return EXIT_OK


def cmd_eval(args) -> int:
    graph = load_graph(args.graph, args.index)
    platform = load_platform(args.platform, args.cpu_parallelism)
    timing = _timing(args, graph, platform)
    mapping = load_mapping(args.mapping, graph, platform)
    opts = EvalOptions(bus_overlap=args.bus_overlap, streaming=args.streaming,
                       order_seed=args.order_seed)
    makespan, timeline = evaluate(graph, platform, timing, mapping, opts)
    print(f"makespan_s {makespan!r}")
    if args.timeline:
        write_json(args.timeline, timeline.to_dict())
    if args.gantt:
        Path(args.gantt).write_text(render_gantt(timeline, platform.unit_ids))
    if math.isinf(makespan):
        print(f"infinite transfer on edge {timeline.infinite_edge}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _formulation(args, graph) -> Formulation:
    order = topsort_bfs(graph, seed=args.order_seed) if args.order_seed is not None else None
    return Formulation.parse(args.formulation, order=order, pairs=args.pairs)


def cmd_solve(args) -> int:
    graph = load_graph(args.graph, args.index)
    platform = load_platform(args.platform, args.cpu_parallelism)
    timing = _timing(args, graph, platform)
    form = _formulation(args, graph)
    cmd = args.solver_cmd or os.environ.get(SOLVER_ENV)
    options = SolverOptions(time_limit=args.time_limit, gap=args.gap, mode=args.mode,
                            budget=args.budget, external_cmd=cmd)
    sol, mapping = solve(graph, platform, timing, form, options)
    if sol.status == INFEASIBLE or not mapping:
        print(f"status {sol.status}", file=sys.stderr)
        return EXIT_INFEASIBLE
    makespan, _ = evaluate(graph, platform, timing, mapping,
                           EvalOptions(streaming=form.streaming))
    print(f"status {sol.status}")
    print(f"objective_s {sol.objective!r}")
    print(f"makespan_s {makespan!r}")
    if args.output:
        write_json(args.output, {"formulation": form.label, "status": sol.status,
                                 "objective_s": sol.objective, "makespan_s": makespan,
                                 "mapping": mapping_to_json(mapping)})
    return EXIT_OK


def cmd_export_lp(args) -> int:
    graph = load_graph(args.graph, args.index)
    platform = load_platform(args.platform, args.cpu_parallelism)
    timing = _timing(args, graph, platform)
    model, _ = _formulation(args, graph).build(graph, platform, timing)
    if args.output and args.output != "-":
        export_lp(model, args.output)
    else:
        export_lp(model, sys.stdout)
    return EXIT_OK


def cmd_experiment(args) -> int:
    data = read_json(args.config) if args.config else {}
    overrides = {k: v for k, v in {
        "platform": args.platform, "edges": args.edges, "count": args.count,
        "seed": args.seed, "complexity": args.complexity, "mode": args.mode,
        "time_limit": args.time_limit, "workers": args.workers,
        "formulations": args.formulations.split(",") if args.formulations else None,
    }.items() if v is not None}
    if args.no_times:
        overrides["record_times"] = False
    if args.mode == "external" or data.get("mode") == "external":
        overrides.setdefault("external_cmd", os.environ.get(SOLVER_ENV))
    data.update(overrides)
    try:
        cfg = ExperimentConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad experiment config: {exc}") from None
    report = run_experiment(cfg)
    if args.csv:
        _emit(report.to_csv(), args.csv)
    if args.json:
        _emit(dumps(report.to_dict()), args.json)
    for name, agg in report.aggregates.items():
        avg = agg["avg_pct"]
        print(f"{name}: n={agg['n']} improved={agg['improved']} "
              f"avg={'-' if avg is None else f'{avg:+.1f}%'}", file=sys.stderr)
    return EXIT_OK


def cmd_render(args) -> int:
    if args.timeline:
        tl = Timeline.from_dict(read_json(args.timeline))
        _emit(render_gantt(tl), args.output)
        return EXIT_OK
    if not args.graph:
        raise UsageError("render needs a graph or --timeline")
    graph = load_graph(args.graph, args.index)
    mapping = None
    if args.mapping:
        platform = load_platform(args.platform, args.cpu_parallelism)
        mapping = load_mapping(args.mapping, graph, platform)
    _emit(render_dot(graph, mapping), args.output)
    return EXIT_OK


# -- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hetmap", description="Map task graphs onto heterogeneous platforms.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def graph_args(sp, needs_graph=True):
        if needs_graph:
            sp.add_argument("graph", help="task graph JSON")
        sp.add_argument("--index", type=int, default=0, help="graph index in a multi-graph file")
        sp.add_argument("--platform", default="CG", help="preset (CG, CGF, CGFF) or JSON file")
        sp.add_argument("--cpu-parallelism", type=int, default=None)
        sp.add_argument("--pin-io", action="store_true",
                        help="keep source and sink in the baseline RAM")

    g = sub.add_parser("gen", help="generate random task graphs")
    g.add_argument("--edges", type=int, required=True)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--source-bytes", type=float, default=1e8)
    g.add_argument("--fixed-load", type=float, default=None)
    g.add_argument("--complexity", type=float, default=None,
                   help="constant complexity factor instead of the log-normal draw")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("eval", help="makespan of a mapping")
    graph_args(e)
    e.add_argument("--mapping", default="all-cpu", help="'all-cpu' or a mapping JSON")
    e.add_argument("--bus-overlap", action="store_true")
    e.add_argument("--streaming", action="store_true")
    e.add_argument("--order-seed", type=int, default=None)
    e.add_argument("--timeline", help="write the event timeline JSON here")
    e.add_argument("--gantt", help="write a Gantt SVG here")
    e.set_defaults(func=cmd_eval)

    for name, func, helptext in (("solve", cmd_solve, "solve a formulation"),
                                 ("export-lp", cmd_export_lp, "write a formulation as LP text")):
        s = sub.add_parser(name, help=helptext)
        graph_args(s)
        s.add_argument("--formulation", default="time",
                       help="device, time or time+streaming")
        s.add_argument("--pairs", default="all", choices=["all", "path-pruned"])
        s.add_argument("--order-seed", type=int, default=None)
        s.add_argument("-o", "--output")
        if name == "solve":
            s.add_argument("--mode", default="exhaustive",
                           choices=["exhaustive", "bnb", "highs", "external"])
            s.add_argument("--time-limit", type=float, default=60.0)
            s.add_argument("--gap", type=float, default=1e-6)
            s.add_argument("--budget", type=int, default=10_000_000)
            s.add_argument("--solver-cmd", default=None,
                           help=f"command template with {{lp}} and {{sol}}; "
                                f"defaults to ${SOLVER_ENV}")
        s.set_defaults(func=func)

    x = sub.add_parser("experiment", help="batch comparison against all-CPU")
    x.add_argument("--config", help="experiment config JSON")
    x.add_argument("--platform")
    x.add_argument("--edges", type=int)
    x.add_argument("--count", type=int)
    x.add_argument("--seed", type=int)
    x.add_argument("--complexity", type=float)
    x.add_argument("--formulations", help="comma separated, e.g. device,time")
    x.add_argument("--mode", choices=["exhaustive", "bnb", "highs", "external"])
    x.add_argument("--time-limit", type=float)
    x.add_argument("--workers", type=int)
    x.add_argument("--no-times", action="store_true", help="omit wall times for byte-stable reports")
    x.add_argument("--csv")
    x.add_argument("--json")
    x.set_defaults(func=cmd_experiment)

    r = sub.add_parser("render", help="DOT graph or Gantt SVG")
    graph_args(r, needs_graph=False)
    r.add_argument("graph", nargs="?")
    r.add_argument("--mapping")
    r.add_argument("--timeline", help="render this timeline JSON as a Gantt SVG")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_render)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("missing subcommand")
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hetmap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BudgetExceeded, InfeasibleModelError) as exc:
        print(f"hetmap: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DataError, GraphError, PlatformError, TimingError, EvaluationError, ModelError,
            LPParseError, ExternalSolverError, ValueError, KeyError) as exc:
        print(f"hetmap: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
