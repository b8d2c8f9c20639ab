"""Hardware description: processing units, memories and the links between them."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional


class PlatformError(ValueError):
    pass


@dataclass(frozen=True)
class MemoryUnit:
    id: str
    rate: Optional[float] = None  # explicit bytes/s
    bus_clock: Optional[float] = None  # Hz
    bus_width: Optional[float] = None  # bytes
    channels: int = 1
    is_virtual: bool = False
    owner: Optional[str] = None


@dataclass(frozen=True)
class ProcUnit:
    id: str
    clock: float
    overhead_penalty: float = 1.0
    cores: int = 1
    data_parallelism: int = 1
    dataflow: bool = False
    area_capacity: float = 0.0


def memory_rate(mem: MemoryUnit) -> float:
    """Bytes/s of a physical memory."""
    if mem.is_virtual:
        raise PlatformError("virtual memories have no finite rate")
    if mem.rate is not None:
        return float(mem.rate)
    if mem.bus_clock is None or mem.bus_width is None:
        raise PlatformError(f"memory {mem.id} has neither a rate nor bus parameters")
    return float(mem.bus_clock) * float(mem.bus_width) * mem.channels


def proc_rates(dev: ProcUnit) -> tuple[float, float]:
    """(serial rate in ops/s, parallelization factor)."""
    return dev.clock * dev.overhead_penalty, float(dev.cores * dev.data_parallelism)


def _link_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Platform:
    proc_units: tuple[ProcUnit, ...]
    memories: tuple[MemoryUnit, ...]
    assoc: dict[str, frozenset[str]]
    # unordered memory pair -> optional rate cap in bytes/s (None = uncapped)
    links: dict[tuple[str, str], Optional[float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        problems = self.problems()
        if problems:
            raise PlatformError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        ids = [u.id for u in self.proc_units] + [m.id for m in self.memories]
        if len(set(ids)) != len(ids):
            out.append("unit ids must be unique")
        mem_ids = {m.id for m in self.memories}
        for p in self.proc_units:
            r_s, r_p = proc_rates(p)
            if not r_s > 0:
                out.append(f"{p.id}: serial rate must be positive")
            if not 0 < p.overhead_penalty <= 1:
                out.append(f"{p.id}: overhead penalty must lie in (0, 1]")
            if r_p < 1:
                out.append(f"{p.id}: parallelization factor must be >= 1")
            if p.area_capacity < 0:
                out.append(f"{p.id}: area capacity must be nonnegative")
            assoc = self.assoc.get(p.id, frozenset())
            if not assoc:
                out.append(f"{p.id}: needs at least one associated memory")
            for m in sorted(assoc):
                if m not in mem_ids:
                    out.append(f"{p.id}: associated memory {m} does not exist")
        for m in self.memories:
            if m.is_virtual:
                if m.owner is None or m.owner not in {p.id for p in self.proc_units}:
                    out.append(f"{m.id}: virtual memory needs an existing owner")
            else:
                try:
                    if not memory_rate(m) > 0:
                        out.append(f"{m.id}: rate must be positive")
                except PlatformError as exc:
                    out.append(str(exc))
        for (a, b), cap in self.links.items():
            if a not in mem_ids or b not in mem_ids:
                out.append(f"link {a}-{b} must connect two memories")
            if cap is not None and not cap > 0:
                out.append(f"link {a}-{b} has a non-positive rate limit")
        return out

    # lookups

    @property
    def unit_ids(self) -> list[str]:
        return [u.id for u in self.proc_units] + [m.id for m in self.memories]

    def proc(self, uid: str) -> Optional[ProcUnit]:
        for p in self.proc_units:
            if p.id == uid:
                return p
        return None

    def memory(self, uid: str) -> Optional[MemoryUnit]:
        for m in self.memories:
            if m.id == uid:
                return m
        return None

    def is_memory(self, uid: str) -> bool:
        return self.memory(uid) is not None

    def linked(self, a: str, b: str) -> bool:
        return _link_key(a, b) in self.links

    def link_limit(self, a: str, b: str) -> Optional[float]:
        return self.links.get(_link_key(a, b))

    def dataflow_units(self) -> list[ProcUnit]:
        return [p for p in self.proc_units if p.dataflow]

    # serialization

    def to_dict(self) -> dict:
        return {
            "proc_units": [
                {k: getattr(p, k) for k in ("id", "clock", "overhead_penalty", "cores",
                                            "data_parallelism", "dataflow", "area_capacity")}
                for p in self.proc_units
            ],
            "memories": [
                {k: getattr(m, k) for k in ("id", "rate", "bus_clock", "bus_width",
                                            "channels", "is_virtual", "owner")}
                for m in self.memories
            ],
            "assoc": {k: sorted(v) for k, v in sorted(self.assoc.items())},
            "links": [[a, b, cap] for (a, b), cap in sorted(self.links.items())],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Platform":
        try:
            procs = tuple(ProcUnit(**p) for p in data["proc_units"])
            mems = tuple(MemoryUnit(**m) for m in data["memories"])
            assoc = {k: frozenset(v) for k, v in data["assoc"].items()}
            links = {_link_key(a, b): cap for a, b, cap in data.get("links", [])}
        except (KeyError, TypeError, ValueError) as exc:
            raise PlatformError(f"malformed platform document: {exc}") from exc
        return cls(procs, mems, assoc, links)


def complete_links(memory_ids: list[str]) -> dict[tuple[str, str], Optional[float]]:
    return {_link_key(a, b): None
            for k, a in enumerate(memory_ids) for b in memory_ids[k + 1:]}


# Evaluation-section devices.  CPU r_p = 32 threads x 8 SIMD lanes.
CPU = ProcUnit("CPU", clock=2.4e9, cores=32, data_parallelism=8)
GPU = ProcUnit("GPU", clock=1.6e9, cores=3584, data_parallelism=1)
CPU_RAM = MemoryUnit("CPU_RAM", rate=170e9)
GPU_RAM = MemoryUnit("GPU_RAM", rate=410e9)


def _fpga(k: int) -> tuple[ProcUnit, MemoryUnit]:
    suffix = "" if k == 1 else str(k)
    return (ProcUnit(f"FPGA{suffix}", clock=0.4e9, dataflow=True, area_capacity=28.0),
            MemoryUnit(f"FPGA{suffix}_RAM", rate=11e9))


PRESETS = ("CG", "CGF", "CGFF")


def preset(name: str, cpu_parallelism: Optional[int] = None) -> Platform:
    """CG, CGF or CGFF.  ``cpu_parallelism`` overrides the CPU SIMD factor."""
    if name not in PRESETS:
        raise PlatformError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    cpu = CPU if cpu_parallelism is None else replace(CPU, data_parallelism=cpu_parallelism)
    procs = [cpu, GPU]
    mems = [CPU_RAM, GPU_RAM]
    assoc = {"CPU": frozenset({"CPU_RAM"}), "GPU": frozenset({"GPU_RAM"})}
    for k in range(1, name.count("F") + 1):
        f, fm = _fpga(k)
        procs.append(f)
        mems.append(fm)
        assoc[f.id] = frozenset({fm.id})
    return Platform(tuple(procs), tuple(mems), assoc,
                    complete_links([m.id for m in mems]))


def add_virtual_memory(platform: Platform, owner: str) -> Platform:
    """Attach a zero-cost scratch memory to ``owner``; unreachable from anywhere else."""
    if platform.proc(owner) is None:
        raise PlatformError(f"unknown processing unit {owner!r}")
    taken = set(platform.unit_ids)
    k = 0
    while f"{owner}_VMEM{k}" in taken:
        k += 1
    vm = MemoryUnit(f"{owner}_VMEM{k}", is_virtual=True, owner=owner)
    assoc = dict(platform.assoc)
    assoc[owner] = assoc[owner] | {vm.id}
    return Platform(platform.proc_units, platform.memories + (vm,), assoc,
                    dict(platform.links))


def fits(platform: Platform, unit: str, area: float) -> bool:
    p = platform.proc(unit)
    return p is not None and p.dataflow and area <= p.area_capacity + 1e-12

