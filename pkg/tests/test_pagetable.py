import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import VPN1
from spectrans.errors import AlreadyMappedError, PageFault
from spectrans.hashing import FALLBACK, HashPolicy
from spectrans.hierarchy import Hierarchy, HierarchyConfig
from spectrans.mem import PhysMem
from spectrans.pagetable import (
    NestedPageTable,
    RadixPageTable,
    level_index,
    nested_walk,
    pt_entry_address,
    walk,
)
from spectrans.tlb import MmuState

T_PWC = 2
T_DRAM = 4 + 12 + 35 + 120


class FlatMemory:
    """Every access costs the same and is logged."""

    def __init__(self, latency=T_DRAM):
        self.latency = latency
        self.log = []

    def access(self, paddr, now, kind="demand"):
        self.log.append(paddr)
        return self.latency, "DRAM"


def test_level_index():
    assert [level_index(0, l) for l in (4, 3, 2, 1)] == [0, 0, 0, 0]
    assert [level_index(511, l) for l in (4, 3, 2, 1)] == [0, 0, 0, 511]
    assert level_index(1 << 35, 4) == 256
    with pytest.raises(ValueError):
        level_index(0, 5)


def test_pt_entry_address():
    assert pt_entry_address(0, 0) == 0
    assert pt_entry_address(0, 511) == 4088
    assert pt_entry_address(3, 513) == 12296


@given(st.integers(0, (1 << 27) - 1), st.integers(0, 1 << 20))
def test_pt_entry_address_injective_within_frame(block, frame):
    base = block << 9
    addrs = {pt_entry_address(frame, base + i) for i in range(512)}
    assert len(addrs) == 512


def test_workflow_fault(workflow_policy):
    mem = PhysMem(16)
    mem.claim(2)
    table = RadixPageTable()
    out = table.map_page(mem, workflow_policy, VPN1)
    assert (out.ppn, out.tier) == (7, 2)
    assert table.leaf_frame(VPN1) == 0
    assert table.pt_outcomes[VPN1 >> 9].tier == 1
    # upper levels come from the fallback allocator
    assert sorted(table.frames.values()) == [0, 1, 3, 4]
    for ppn in table.frames.values():
        assert not mem.is_free(ppn)


def test_same_block_reuses_leaf_frame():
    policy = HashPolicy.from_master(3, 4096)
    mem = PhysMem(4096)
    table = RadixPageTable()
    table.map_page(mem, policy, 1024)
    frames = len(table.frames)
    used = mem.occupancy_count
    table.map_page(mem, policy, 1025)
    assert len(table.frames) == frames
    assert mem.occupancy_count == used + 1


def test_double_map_rejected():
    policy = HashPolicy.from_master(1, 64)
    mem = PhysMem(64)
    table = RadixPageTable()
    table.map_page(mem, policy, 3)
    with pytest.raises(AlreadyMappedError):
        table.map_page(mem, policy, 3)


def _mapped(vpns, frames=1 << 14, tiers=3):
    policy = HashPolicy.from_master(tiers, frames)
    mem = PhysMem(frames)
    table = RadixPageTable()
    for v in vpns:
        table.map_page(mem, policy, v)
    return table, mem, policy


def test_walk_pwc_hits_then_dram_leaf():
    vpn = 0x40000
    table, _, _ = _mapped([vpn, vpn + 8])
    mmu = MmuState()
    h = Hierarchy(HierarchyConfig(contention=False))
    walk(table, vpn, mmu, h)
    # vpn + 8 shares every upper entry but its PTE is on another line
    res = walk(table, vpn + 8, mmu, h)
    assert [s.source for s in res.steps] == ["PWC", "PWC", "PWC", "DRAM"]
    assert res.latency == 3 * T_PWC + T_DRAM
    assert res.ppn == table.leaves[vpn + 8]


def test_walk_cold_latency_is_sum_of_steps():
    table, _, _ = _mapped([0x40000])
    res = walk(table, 0x40000, MmuState(), Hierarchy(HierarchyConfig(contention=False)))
    assert res.accesses == 4
    assert res.latency == sum(s.latency for s in res.steps) == 3 * (T_PWC + T_DRAM) + T_DRAM


def test_walk_resolves_mapped_frame(workflow_policy):
    mem = PhysMem(16)
    mem.claim(2)
    table = RadixPageTable()
    table.map_page(mem, workflow_policy, VPN1)
    res = walk(table, VPN1, MmuState(), FlatMemory())
    assert res.ppn == 7
    assert res.pt_frame_ppn == 0
    assert res.steps[-1].paddr == pt_entry_address(0, VPN1)


def test_walk_unmapped_faults():
    with pytest.raises(PageFault):
        walk(RadixPageTable(), 5, MmuState(), FlatMemory())


def test_walk_with_pt_speculation():
    table, _, _ = _mapped([0x40000])
    leaf = table.leaf_frame(0x40000)
    flat = FlatMemory()
    # speculative PTE fetch lands at cycle 1000, well after the upper levels
    res = walk(table, 0x40000, MmuState(), flat, start=0, pt_spec={leaf: 1000})
    upper = sum(s.latency for s in res.steps[:3])
    assert res.pt_hit
    assert res.latency == max(upper, 1000)
    assert len(flat.log) == 3
    res = walk(table, 0x40000, MmuState(), FlatMemory(), start=0, pt_spec={leaf: 10})
    assert res.latency == upper
    res = walk(table, 0x40000, MmuState(), FlatMemory(), start=0, pt_spec={leaf + 1: 10})
    assert not res.pt_hit and res.latency == upper + T_DRAM


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, (1 << 20) - 1), min_size=1, max_size=40, unique=True))
def test_walk_always_resolves_allocation(vpns):
    table, _, _ = _mapped(vpns, frames=1 << 12)
    mmu = MmuState()
    h = Hierarchy()
    for v in vpns + vpns[::-1]:
        assert walk(table, v, mmu, h).ppn == table.outcomes[v].ppn


def _nested(gvpns, frames=1 << 14):
    policy = HashPolicy.from_master(3, frames)
    nested = NestedPageTable(PhysMem(frames), PhysMem(frames), policy)
    for g in gvpns:
        nested.map_page(g)
    return nested


def test_nested_cold_walk_is_24_accesses():
    nested = _nested([0x1234])
    flat = FlatMemory()
    res = nested_walk(nested, 0x1234, MmuState(), flat)
    assert res.accesses == 24 == len(flat.log)
    assert res.latency == 24 * T_DRAM
    assert res.ppn == nested.outcomes[0x1234].ppn


@pytest.mark.parametrize("hits", list(itertools.product([False, True], repeat=4)))
def test_nested_access_count_formula(hits):
    g = 0x5_4321
    nested = _nested([g])
    mmu = MmuState()
    for level, hit in zip((4, 3, 2, 1), hits):
        if hit:
            gframe = nested.guest.frame(g, level)
            mmu.ntlb.insert(gframe, nested.host.leaves[gframe])
    res = nested_walk(nested, g, mmu, FlatMemory())
    assert res.accesses == 8 + 4 * hits.count(False)
    assert res.ppn == nested.translate(g)


def test_nested_warm_ntlb_gives_8():
    nested = _nested([0x777, 0x778])
    mmu = MmuState()
    nested_walk(nested, 0x777, mmu, FlatMemory())
    res = nested_walk(nested, 0x778, mmu, FlatMemory())
    assert res.accesses == 8


def test_nested_resolution_and_faults():
    gvpns = list(range(0, 5000, 37))
    nested = _nested(gvpns)
    mmu = MmuState()
    h = Hierarchy()
    for g in gvpns:
        res = nested_walk(nested, g, mmu, h)
        assert res.ppn == nested.outcomes[g].ppn
        assert 8 <= res.accesses <= 24
    with pytest.raises(PageFault):
        nested_walk(nested, 1, mmu, h)
    with pytest.raises(AlreadyMappedError):
        nested.map_page(0)


def test_nested_data_frames_follow_gvpn_hash():
    frames = 1 << 14
    nested = _nested(range(100), frames)
    policy = nested.host_policy
    for g, out in nested.outcomes.items():
        if out.tier != FALLBACK:
            assert out.ppn == policy.hash(out.tier, g)
