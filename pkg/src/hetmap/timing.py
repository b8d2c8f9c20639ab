"""Implementation model: which node may run where, and how long it takes.

Three backends share one interface.  ``estimate`` derives times from task
attributes and device rates, ``table`` looks up measured seconds, and
``mixed`` prefers measurements and falls back to penalised estimates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .appgraph import Node
from .platform import Platform, memory_rate, proc_rates

INF = math.inf

BACKENDS = ("estimate", "table", "mixed")


class TimingError(ValueError):
    pass


@dataclass(frozen=True)
class CompatRule:
    """Restrictions on top of the role match.

    ``allowed`` pins nodes to a subset of units; ``max_bytes`` caps how much
    data a memory node may hold on a given memory.
    """

    allowed: dict[int, frozenset[str]] = field(default_factory=dict)
    max_bytes: dict[str, float] = field(default_factory=dict)

    def permits(self, node: Node, unit: str) -> bool:
        allowed = self.allowed.get(node.id)
        if allowed is not None and unit not in allowed:
            return False
        cap = self.max_bytes.get(unit)
        if cap is not None and node.kind.is_memory and node.data_bytes > cap:
            return False
        return True


@dataclass
class MeasuredTable:
    exec: dict[tuple[int, str], float] = field(default_factory=dict)
    transport: dict[tuple[int, str, str], float] = field(default_factory=dict)

    def problems(self) -> list[str]:
        out = []
        for key, v in list(self.exec.items()) + list(self.transport.items()):
            if not (v >= 0 and math.isfinite(v)):
                out.append(f"table entry {key} = {v} must be finite and nonnegative")
        return out

    def to_dict(self) -> dict:
        return {
            "exec": [[n, u, s] for (n, u), s in sorted(self.exec.items())],
            "transport": [[n, a, b, s] for (n, a, b), s in sorted(self.transport.items())],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MeasuredTable":
        try:
            return cls(
                exec={(int(n), str(u)): float(s) for n, u, s in data.get("exec", [])},
                transport={(int(n), str(a), str(b)): float(s)
                           for n, a, b, s in data.get("transport", [])},
            )
        except (TypeError, ValueError) as exc:
            raise TimingError(f"malformed measured table: {exc}") from exc

    @classmethod
    def load(cls, path) -> "MeasuredTable":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class TimingModel:
    def __init__(self, platform: Platform, backend: str = "estimate",
                 table: Optional[MeasuredTable] = None, mixed_penalty: float = 1.0,
                 rule: Optional[CompatRule] = None):
        if backend not in BACKENDS:
            raise TimingError(f"unknown backend {backend!r}")
        if backend in ("table", "mixed") and table is None:
            raise TimingError(f"{backend} backend needs a measured table")
        if mixed_penalty < 1:
            raise TimingError("mixed_penalty must be >= 1")
        if table is not None and table.problems():
            raise TimingError("; ".join(table.problems()))
        self.platform = platform
        self.backend = backend
        self.table = table
        self.mixed_penalty = mixed_penalty
        self.rule = rule or CompatRule()

    def with_rule(self, rule: CompatRule) -> "TimingModel":
        return TimingModel(self.platform, self.backend, self.table, self.mixed_penalty, rule)

    def compatible(self, node: Node, unit: str) -> bool:
        is_mem = self.platform.is_memory(unit)
        if is_mem != node.kind.is_memory:
            return False
        if not is_mem and self.platform.proc(unit) is None:
            return False
        return self.rule.permits(node, unit)

    def compatible_units(self, node: Node) -> list[str]:
        return [u for u in self.platform.unit_ids if self.compatible(node, u)]

    # execution

    def estimate_exec(self, node: Node, unit: str) -> float:
        if node.kind.is_memory:
            return 0.0
        dev = self.platform.proc(unit)
        attrs = node.attrs
        assert dev is not None and attrs is not None
        r_s, r_p = proc_rates(dev)
        p = attrs.parallelizability
        work = attrs.complexity_coeff * node.data_bytes
        t = work / (r_s * (1.0 - p + p * r_p))
        if dev.dataflow and attrs.area <= dev.area_capacity:
            t /= attrs.streamability
        return t

    def exec_time(self, node: Node, unit: str) -> float:
        if not self.compatible(node, unit):
            return INF
        if node.kind.is_memory:
            return 0.0
        if self.backend == "estimate":
            return self.estimate_exec(node, unit)
        measured = self.table.exec.get((node.id, unit))  # type: ignore[union-attr]
        if measured is not None:
            return measured
        if self.backend == "table":
            raise TimingError(f"no measured execution time for node {node.id} on {unit}")
        return self.estimate_exec(node, unit) * self.mixed_penalty

    # transport

    def estimate_transport(self, node: Node, src: str, dst: str) -> float:
        if src == dst:
            return 0.0
        plat = self.platform
        ms, md = plat.memory(src), plat.memory(dst)
        nbytes = node.output_bytes
        if ms is not None and md is not None:
            if ms.is_virtual or md.is_virtual or not plat.linked(src, dst):
                return INF
            rate = min(memory_rate(ms), memory_rate(md))
            cap = plat.link_limit(src, dst)
            if cap is not None:
                rate = min(rate, cap)
            return nbytes / rate
        if ms is None and md is None:
            return INF  # processors never talk directly
        mem, proc = (ms, dst) if ms is not None else (md, src)
        if mem.id not in plat.assoc.get(proc, ()):
            return INF  # processors only reach their associated memories
        if mem.is_virtual:
            return 0.0
        return nbytes / memory_rate(mem)

    def transport_time(self, node: Node, src: str, dst: str) -> float:
        if src == dst:
            return 0.0
        if self.backend == "estimate":
            return self.estimate_transport(node, src, dst)
        measured = self.table.transport.get((node.id, src, dst))  # type: ignore[union-attr]
        if measured is None:
            measured = self.table.transport.get((node.id, dst, src))  # type: ignore[union-attr]
        if measured is not None:
            return measured
        if self.backend == "table":
            raise TimingError(f"no measured transport time for node {node.id} {src}->{dst}")
        est = self.estimate_transport(node, src, dst)
        return est * self.mixed_penalty


def pin_nodes(timing: TimingModel, pins: dict[int, str]) -> TimingModel:
    allowed = dict(timing.rule.allowed)
    allowed.update({n: frozenset({u}) for n, u in pins.items()})
    return timing.with_rule(CompatRule(allowed, dict(timing.rule.max_bytes)))
