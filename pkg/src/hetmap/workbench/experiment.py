"""Batch runs: generate graphs, solve each strategy, score mappings against all-CPU."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

from ..appgraph import (AppGraph, NodeKind, constant_complexity_sampler, default_sampler,
                        expand_tasks, gen_series_parallel)
from ..evaluator import EvalOptions, evaluate
from ..milp import ModelError
from ..platform import Platform
from ..solver import BudgetExceeded, Formulation, SolverOptions, solve
from ..timing import TimingModel, pin_nodes
from .io import all_cpu_mapping, baseline_units, load_platform

CSV_COLUMNS = ["seed", "nodes", "edges", "baseline_s", "strategy", "makespan_s",
               "pct_change", "status", "solve_s"]


@dataclass
class ExperimentConfig:
    platform: str = "CG"
    edges: int = 15
    count: int = 100
    seed: int = 0
    source_bytes: float = 1e8
    fixed_load: Optional[float] = 1e8
    complexity: Optional[float] = None  # constant c instead of the log-normal draw
    formulations: list[str] = field(default_factory=lambda: ["device", "time"])
    mode: str = "highs"
    time_limit: float = 60.0
    gap: float = 1e-6
    pairs: str = "path-pruned"
    bus_overlap: bool = False
    pin_io: bool = True  # source and sink live in the baseline RAM
    cpu_parallelism: Optional[int] = None
    workers: int = 1
    record_times: bool = True
    external_cmd: Optional[str] = None

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("count must be at least 1")
        if self.edges < 1:
            raise ValueError("edges must be at least 1")
        for f in self.formulations:
            Formulation.parse(f)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Row:
    seed: int
    nodes: int
    edges: int
    baseline_s: float
    strategy: str
    makespan_s: Optional[float]
    pct_change: Optional[float]
    status: str
    solve_s: Optional[float]
    same_device_frac: Optional[float] = None
    mapping: Optional[dict[str, str]] = None


@dataclass
class ExperimentReport:
    config: dict
    rows: list[Row]
    aggregates: dict[str, dict]

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": [asdict(r) for r in self.rows],
                "aggregates": self.aggregates}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def pct_change(baseline: float, value: float) -> float:
    """Improvement over the baseline in percent; positive means faster."""
    return 100.0 * (baseline - value) / baseline


def same_device_fraction(graph: AppGraph, mapping: dict[int, str]) -> Optional[float]:
    """Share of task-to-task edges whose two compute nodes share a processor."""
    compute_of_out, compute_of_in = {}, {}
    for i, c, o in graph.tasks():
        compute_of_in[i] = c
        compute_of_out[o] = c
    pairs = [(compute_of_out[u], compute_of_in[v]) for u, v in graph.edges
             if u in compute_of_out and v in compute_of_in]
    if not pairs:
        return None
    return sum(mapping[a] == mapping[b] for a, b in pairs) / len(pairs)


def make_graph(cfg: ExperimentConfig, seed: int) -> AppGraph:
    sampler = (default_sampler if cfg.complexity is None
               else constant_complexity_sampler(cfg.complexity))
    skeleton = gen_series_parallel(cfg.edges, seed)
    return expand_tasks(skeleton, sampler, cfg.source_bytes, seed=seed,
                        fixed_load=cfg.fixed_load)


def aggregate(rows: list[Row], strategies: list[str]) -> dict[str, dict]:
    out = {}
    for s in strategies:
        ok = [r for r in rows if r.strategy == s and r.pct_change is not None]
        pcts = [r.pct_change for r in ok]
        fracs = [r.same_device_frac for r in ok if r.same_device_frac is not None]
        out[s] = {
            "n": len(ok),
            "failed": sum(1 for r in rows if r.strategy == s and r.pct_change is None),
            "avg_pct": sum(pcts) / len(pcts) if pcts else None,
            "min_pct": min(pcts) if pcts else None,
            "max_pct": max(pcts) if pcts else None,
            "improved": sum(1 for p in pcts if p > 0),
            "same_device_frac": sum(fracs) / len(fracs) if fracs else None,
        }
    return out


def run_graph(cfg: ExperimentConfig, seed: int, platform: Optional[Platform] = None) -> list[Row]:
    platform = platform or load_platform(cfg.platform, cfg.cpu_parallelism)
    graph = make_graph(cfg, seed)
    timing = TimingModel(platform)
    if cfg.pin_io:
        _, ram = baseline_units(platform)
        timing = pin_nodes(timing, {n: ram for n in graph.of_kind(NodeKind.SOURCE, NodeKind.SINK)})
    base_map = all_cpu_mapping(graph, platform)
    base_opts = EvalOptions(bus_overlap=cfg.bus_overlap)
    baseline, _ = evaluate(graph, platform, timing, base_map, base_opts)
    options = SolverOptions(time_limit=cfg.time_limit, gap=cfg.gap, mode=cfg.mode,
                            external_cmd=cfg.external_cmd)
    rows = []
    for label in cfg.formulations:
        form = Formulation.parse(label, pairs=cfg.pairs)
        row = Row(seed, len(graph.nodes), len(graph.edges), baseline, label,
                  None, None, "Error", None)
        t0 = time.perf_counter()
        try:
            sol, mapping = solve(graph, platform, timing, form, options)
            row.status = sol.status
            if mapping:
                opts = EvalOptions(bus_overlap=cfg.bus_overlap, streaming=form.streaming)
                makespan, _ = evaluate(graph, platform, timing, mapping, opts)
                row.makespan_s = makespan
                row.pct_change = pct_change(baseline, makespan) if math.isfinite(makespan) else None
                row.same_device_frac = same_device_fraction(graph, mapping)
                row.mapping = {str(k): v for k, v in sorted(mapping.items())}
        except BudgetExceeded:
            row.status = "BudgetExceeded"
        except ModelError as exc:
            row.status = f"Error: {exc}"
        if cfg.record_times:
            row.solve_s = time.perf_counter() - t0
        rows.append(row)
    return rows


def _run_one(args: tuple[dict, int]) -> list[Row]:
    cfg_dict, seed = args
    return run_graph(ExperimentConfig.from_dict(cfg_dict), seed)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    seeds = [cfg.seed + k for k in range(cfg.count)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            chunks = list(pool.map(_run_one, [(cfg.to_dict(), s) for s in seeds]))
    else:
        platform = load_platform(cfg.platform, cfg.cpu_parallelism)
        chunks = [run_graph(cfg, s, platform) for s in seeds]
    rows = [r for chunk in chunks for r in chunk]
    return ExperimentReport(cfg.to_dict(), rows, aggregate(rows, cfg.formulations))
