"""Cost models and MILP formulations for mapping task graphs onto heterogeneous hardware."""

from .appgraph import (AppGraph, GraphError, Node, NodeKind, TaskAttrs, expand_tasks,
                       gen_series_parallel, topsort_bfs, validate)
from .evaluator import EvalOptions, EvaluationError, Timeline, evaluate, verify_mapping
from .platform import Platform, PlatformError, preset
from .timing import CompatRule, MeasuredTable, TimingModel

__version__ = "0.1.0"

__all__ = [
    "AppGraph", "GraphError", "Node", "NodeKind", "TaskAttrs", "expand_tasks",
    "gen_series_parallel", "topsort_bfs", "validate", "EvalOptions", "EvaluationError",
    "Timeline", "evaluate", "verify_mapping", "Platform", "PlatformError", "preset",
    "CompatRule", "MeasuredTable", "TimingModel",
]
