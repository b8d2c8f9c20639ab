"""Hill climbing over single-node reassignments, scored by the clock simulation."""

from __future__ import annotations

from dataclasses import dataclass

from ..appgraph import AppGraph
from ..evaluator import EvalOptions, EvaluationError, evaluate, verify_mapping
from ..platform import Platform
from ..timing import TimingModel


@dataclass(frozen=True)
class LocalOptions:
    max_evaluations: int = 20_000
    eval_options: EvalOptions = EvalOptions()
    min_gain: float = 1e-12


def _area_ok(graph: AppGraph, platform: Platform, mapping: dict[int, str], unit: str) -> bool:
    dev = platform.proc(unit)
    if dev is None or not dev.dataflow:
        return True
    used = sum(graph.nodes[n].attrs.area for n, u in mapping.items()
               if u == unit and graph.nodes[n].attrs is not None)
    return used <= dev.area_capacity + 1e-9


def _moves(graph: AppGraph, platform: Platform, timing: TimingModel, current: dict[int, str]):
    """Single-node reassignments, then whole-task moves that carry a task's
    input and output memories along to an associated memory of the new unit."""
    for nid in sorted(graph.nodes):
        for unit in timing.compatible_units(graph.nodes[nid]):
            if unit != current[nid]:
                yield {nid: unit}
    for i, c, o in graph.tasks():
        for unit in timing.compatible_units(graph.nodes[c]):
            for mem in sorted(platform.assoc.get(unit, ())):
                if not (timing.compatible(graph.nodes[i], mem)
                        and timing.compatible(graph.nodes[o], mem)):
                    continue
                move = {i: mem, c: unit, o: mem}
                if any(current[n] != u for n, u in move.items()):
                    yield move


def improve_local(graph: AppGraph, platform: Platform, timing: TimingModel,
                  mapping: dict[int, str], options: LocalOptions = LocalOptions()) -> dict[int, str]:
    """First-improvement descent; moves are scanned in a fixed order."""
    problems = verify_mapping(graph, platform, timing, mapping)
    if problems:
        raise EvaluationError(problems)
    current = dict(mapping)
    best, _ = evaluate(graph, platform, timing, current, options.eval_options)
    budget = options.max_evaluations
    improved = True
    while improved and budget > 0:
        improved = False
        for move in _moves(graph, platform, timing, current):
            if budget <= 0:
                break
            trial = {**current, **move}
            if not all(_area_ok(graph, platform, trial, u) for u in set(move.values())):
                continue
            budget -= 1
            cost, _ = evaluate(graph, platform, timing, trial, options.eval_options)
            if cost < best - options.min_gain * max(1.0, best):
                current, best, improved = trial, cost, True
                break
    return current
