import math

import pytest

from hetmap.platform import (MemoryUnit, Platform, PlatformError, ProcUnit, add_virtual_memory,
                             fits, memory_rate, preset, proc_rates)
from hetmap.timing import TimingModel
from hetmap.appgraph import Node, NodeKind


def test_memory_rate_from_bus():
    assert memory_rate(MemoryUnit("m", bus_clock=1e9, bus_width=8, channels=2)) == 16e9


def test_memory_rate_explicit():
    cg = preset("CGF")
    assert memory_rate(cg.memory("GPU_RAM")) == 410e9
    assert memory_rate(cg.memory("FPGA_RAM")) == 11e9
    assert memory_rate(cg.memory("CPU_RAM")) == 170e9


@pytest.mark.parametrize("field,lo,hi", [("bus_clock", 1e9, 2e9), ("bus_width", 4, 8),
                                         ("channels", 1, 3)])
def test_memory_rate_monotone(field, lo, hi):
    base = dict(bus_clock=1e9, bus_width=8, channels=2)
    a = memory_rate(MemoryUnit("m", **{**base, field: lo}))
    b = memory_rate(MemoryUnit("m", **{**base, field: hi}))
    assert a < b


def test_memory_rate_needs_spec():
    with pytest.raises(PlatformError):
        memory_rate(MemoryUnit("m"))


def test_proc_rates_presets():
    cg = preset("CG")
    assert proc_rates(cg.proc("CPU")) == (2.4e9, 256.0)
    assert proc_rates(cg.proc("GPU")) == (1.6e9, 3584.0)


def test_penalty_default_leaves_clock():
    assert proc_rates(ProcUnit("x", clock=3e9))[0] == 3e9
    assert proc_rates(ProcUnit("x", clock=3e9, overhead_penalty=0.5))[0] == 1.5e9


def test_cpu_parallelism_override():
    assert proc_rates(preset("CG", cpu_parallelism=16).proc("CPU"))[1] == 512.0


class TestPresets:
    def test_cg(self):
        p = preset("CG")
        assert len(p.proc_units) == 2 and len(p.memories) == 2

    def test_cgf(self):
        p = preset("CGF")
        assert len(p.proc_units) == 3 and len(p.memories) == 3
        assert p.proc("FPGA").area_capacity == 28 and p.proc("FPGA").dataflow

    def test_cgff_independent(self):
        p = preset("CGFF")
        df = p.dataflow_units()
        assert [d.id for d in df] == ["FPGA", "FPGA2"]
        assert p.assoc["FPGA"] != p.assoc["FPGA2"]
        assert all(d.area_capacity == 28 for d in df)

    def test_subset_property(self):
        cg, cgf, cgff = preset("CG"), preset("CGF"), preset("CGFF")
        assert cgff.proc_units[:3] == cgf.proc_units
        assert cgff.memories[:3] == cgf.memories
        assert cgf.proc_units[:2] == cg.proc_units
        assert cgf.memories[:2] == cg.memories

    def test_penalty_one(self):
        assert all(u.overhead_penalty == 1.0 for u in preset("CGFF").proc_units)

    def test_fpga_rp_one(self):
        assert proc_rates(preset("CGF").proc("FPGA"))[1] == 1.0

    def test_complete_uncapped_links(self):
        p = preset("CGFF")
        ids = [m.id for m in p.memories]
        for a in ids:
            for b in ids:
                if a != b:
                    assert p.linked(a, b) and p.link_limit(a, b) is None

    def test_unknown(self):
        with pytest.raises(PlatformError):
            preset("XYZ")


class TestValidation:
    def test_empty_assoc_rejected(self):
        with pytest.raises(PlatformError, match="associated memory"):
            Platform((ProcUnit("P", clock=1e9),), (MemoryUnit("M", rate=1e9),), {})

    def test_link_between_processors_rejected(self):
        with pytest.raises(PlatformError, match="two memories"):
            Platform((ProcUnit("P", clock=1e9),), (MemoryUnit("M", rate=1e9),),
                     {"P": frozenset({"M"})}, {("M", "P"): None})

    def test_bad_penalty(self):
        with pytest.raises(PlatformError):
            Platform((ProcUnit("P", clock=1e9, overhead_penalty=1.5),),
                     (MemoryUnit("M", rate=1e9),), {"P": frozenset({"M"})})

    def test_duplicate_ids(self):
        with pytest.raises(PlatformError, match="unique"):
            Platform((ProcUnit("M", clock=1e9),), (MemoryUnit("M", rate=1e9),),
                     {"M": frozenset({"M"})})


class TestVirtualMemory:
    def test_transport_infinite_elsewhere(self):
        p = add_virtual_memory(preset("CG"), "CPU")
        vm = "CPU_VMEM0"
        tm = TimingModel(p)
        node = Node(0, NodeKind.OUTPUT_MEM, 1e8)
        assert tm.transport_time(node, vm, "GPU_RAM") == math.inf
        assert tm.transport_time(node, "CPU_RAM", vm) == math.inf
        assert tm.transport_time(node, vm, "CPU") == 0.0
        assert tm.transport_time(node, "GPU", vm) == math.inf

    def test_twice_distinct(self):
        p = add_virtual_memory(add_virtual_memory(preset("CG"), "CPU"), "CPU")
        assert {"CPU_VMEM0", "CPU_VMEM1"} <= set(p.assoc["CPU"])

    def test_unknown_owner(self):
        with pytest.raises(PlatformError):
            add_virtual_memory(preset("CG"), "TPU")


def test_round_trip():
    p = add_virtual_memory(preset("CGFF"), "GPU")
    again = Platform.from_dict(p.to_dict())
    assert again == p or again.to_dict() == p.to_dict()


def test_fits():
    p = preset("CGF")
    assert fits(p, "FPGA", 28) and not fits(p, "FPGA", 28.5) and not fits(p, "CPU", 1)
