"""JSON files for graphs, platforms, mappings and timelines."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Union

from ..appgraph import AppGraph, NodeKind
from ..platform import PRESETS, Platform, preset

PathLike = Union[str, Path]


class DataError(ValueError):
    """Unreadable or inconsistent input file."""


def dumps(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_json(path: PathLike, data: Any) -> None:
    Path(path).write_text(dumps(data))


def read_json(path: PathLike) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


def load_graphs(path: PathLike) -> list[AppGraph]:
    """A file holds one graph object or a list of them."""
    data = read_json(path)
    items = data if isinstance(data, list) else [data]
    try:
        return [AppGraph.from_dict(d) for d in items]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: not a task graph ({exc})") from None


def load_graph(path: PathLike, index: int = 0) -> AppGraph:
    graphs = load_graphs(path)
    if not 0 <= index < len(graphs):
        raise DataError(f"{path}: no graph at index {index}")
    return graphs[index]


def save_graphs(path: PathLike, graphs: list[AppGraph]) -> None:
    data: Any = graphs[0].to_dict() if len(graphs) == 1 else [g.to_dict() for g in graphs]
    write_json(path, data)


def load_platform(spec: str, cpu_parallelism: int | None = None) -> Platform:
    """A preset name (CG, CGF, CGFF) or a platform JSON file."""
    if spec in PRESETS:
        return preset(spec, cpu_parallelism)
    try:
        return Platform.from_dict(read_json(spec))
    except DataError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{spec}: not a platform ({exc})") from None


def baseline_units(platform: Platform) -> tuple[str, str]:
    """The CPU and its RAM, or the first non-dataflow processor and its first memory."""
    procs = [p for p in platform.proc_units if not p.dataflow]
    cpu = next((p for p in procs if p.id == "CPU"), procs[0] if procs else None)
    if cpu is None or not platform.assoc.get(cpu.id):
        raise DataError("platform has no general-purpose processor with a memory")
    mems = sorted(platform.assoc[cpu.id])
    ram = f"{cpu.id}_RAM" if f"{cpu.id}_RAM" in mems else mems[0]
    return cpu.id, ram


def all_cpu_mapping(graph: AppGraph, platform: Platform) -> dict[int, str]:
    cpu, ram = baseline_units(platform)
    return {n: (cpu if node.kind is NodeKind.COMPUTE else ram) for n, node in graph.nodes.items()}


def load_mapping(spec: str, graph: AppGraph, platform: Platform) -> dict[int, str]:
    if spec == "all-cpu":
        return all_cpu_mapping(graph, platform)
    data = read_json(spec)
    if isinstance(data, dict) and "mapping" in data:
        data = data["mapping"]
    try:
        return {int(k): str(v) for k, v in data.items()}
    except (AttributeError, ValueError) as exc:
        raise DataError(f"{spec}: not a mapping ({exc})") from None


def mapping_to_json(mapping: dict[int, str]) -> dict[str, str]:
    return {str(k): v for k, v in sorted(mapping.items())}
