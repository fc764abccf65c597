"""Four-level radix page table whose frames live in a :class:`PhysMem`.

Level 4 is the root, level 1 the last-level (leaf) table.  The table frame
at level L that covers ``vpn`` is identified by ``vpn >> (9 * L)``, so the
leaf frame for ``vpn`` is keyed by ``vpn >> 9``, the same key the hash
policy uses to place it.  Entries are 8 bytes and hold only the target
frame number.

Only leaf frames are hash-placed; upper-level frames come from the
fallback allocator.  :meth:`RadixPageTable.map_page` allocates in the
order leaf frame, data page, upper levels, which is the order the OS
handles a fault that needs a new leaf table.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import AlreadyMappedError, PageFault
from .hashing import AllocationOutcome, FALLBACK, HashPolicy, allocate_pt_frame, tiered_allocate
from .mem import PAGE_SIZE, PhysMem
from .hierarchy import WALK
from .tlb import MmuState

LEVELS = 4
INDEX_BITS = 9
ENTRY_BYTES = 8
VPN_BITS = 36


def level_index(vpn: int, level: int) -> int:
    if not 1 <= level <= LEVELS:
        raise ValueError(f"level {level} outside [1, 4]")
    return (vpn >> (INDEX_BITS * (level - 1))) & 0x1FF


def frame_key(vpn: int, level: int) -> int:
    """Identifier of the level-``level`` table frame covering ``vpn``."""
    return vpn >> (INDEX_BITS * level)


def entry_path(vpn: int, level: int) -> int:
    """Identifier of the level-``level`` entry for ``vpn`` (PWC tag)."""
    return vpn >> (INDEX_BITS * (level - 1))


def entry_address(frame: int, vpn: int, level: int) -> int:
    return frame * PAGE_SIZE + level_index(vpn, level) * ENTRY_BYTES


def pt_entry_address(pt_frame: int, vpn: int) -> int:
    return pt_frame * PAGE_SIZE + (vpn % 512) * ENTRY_BYTES


@dataclass
class WalkStep:
    level: int
    paddr: int
    source: str  # PWC, L1, L2, LLC, DRAM, or SPEC for a leaf served by speculation
    latency: int
    nested: bool = False


@dataclass
class WalkResult:
    ppn: int
    latency: int
    pt_frame_ppn: int
    steps: list[WalkStep] = field(default_factory=list)
    pt_hit: bool = False

    @property
    def level_hits(self) -> dict[int, str]:
        return {s.level: s.source for s in self.steps if not s.nested}

    @property
    def accesses(self) -> int:
        return len(self.steps)


class RadixPageTable:
    def __init__(self) -> None:
        # (level, frame_key) -> ppn
        self.frames: dict[tuple[int, int], int] = {}
        self.leaves: dict[int, int] = {}
        self.outcomes: dict[int, AllocationOutcome] = {}
        self.pt_outcomes: dict[int, AllocationOutcome] = {}

    @property
    def root_ppn(self) -> int | None:
        return self.frames.get((LEVELS, 0))

    def frame(self, vpn: int, level: int) -> int:
        return self.frames[(level, frame_key(vpn, level))]

    def leaf_frame(self, vpn: int) -> int | None:
        return self.frames.get((1, frame_key(vpn, 1)))

    def is_mapped(self, vpn: int) -> bool:
        return vpn in self.leaves

    def translate(self, vpn: int) -> int:
        try:
            return self.leaves[vpn]
        except KeyError:
            raise PageFault(vpn) from None

    def _ensure_leaf(self, mem: PhysMem, policy: HashPolicy | None, vpn: int) -> list[int]:
        key = frame_key(vpn, 1)
        if (1, key) in self.frames:
            return []
        if policy is None:
            out = AllocationOutcome(mem.fallback_alloc(), FALLBACK)
        else:
            out = allocate_pt_frame(policy, mem, vpn)
        self.frames[(1, key)] = out.ppn
        self.pt_outcomes[key] = out
        return [out.ppn]

    def _ensure_upper(self, mem: PhysMem, vpn: int) -> list[int]:
        new = []
        for level in range(LEVELS, 1, -1):
            k = (level, frame_key(vpn, level))
            if k not in self.frames:
                self.frames[k] = ppn = mem.fallback_alloc()
                new.append(ppn)
        return new

    def map_page(self, mem: PhysMem, policy: HashPolicy, vpn: int) -> AllocationOutcome:
        """Handle a first-touch fault: build missing tables, place the data page."""
        if vpn in self.leaves:
            raise AlreadyMappedError(f"vpn {vpn:#x} already mapped")
        self._ensure_leaf(mem, policy, vpn)
        out = tiered_allocate(policy, mem, vpn)
        self._ensure_upper(mem, vpn)
        self.leaves[vpn] = out.ppn
        self.outcomes[vpn] = out
        return out

    def install(self, mem: PhysMem, policy: HashPolicy | None, vpn: int, ppn: int) -> list[int]:
        """Map ``vpn`` to an already-chosen frame; return newly created table frames."""
        if vpn in self.leaves:
            raise AlreadyMappedError(f"vpn {vpn:#x} already mapped")
        new = self._ensure_leaf(mem, policy, vpn)
        new += self._ensure_upper(mem, vpn)
        self.leaves[vpn] = ppn
        return new

    def contents(self) -> tuple[dict[tuple[int, int], int], dict[int, int]]:
        return dict(self.frames), dict(self.leaves)


def walk(table: RadixPageTable, vpn: int, mmu: MmuState, hierarchy, start: int = 0,
         pt_spec: dict[int, int] | None = None) -> WalkResult:
    """Native 4-level walk starting at cycle ``start``.

    Upper levels (4..2) probe their page walk cache first (2 cycles) and go
    to the cache hierarchy on a miss.  ``pt_spec`` maps speculatively
    fetched leaf-frame numbers to their completion cycle: when the real
    leaf frame is among them, the leaf entry costs only the remaining wait
    for that fetch (zero if it already landed).
    """
    if vpn not in table.leaves:
        raise PageFault(vpn)
    elapsed = 0
    steps = []
    pwc_lat = mmu.pwc_latency
    for level in range(LEVELS, 1, -1):
        frame = table.frame(vpn, level)
        addr = entry_address(frame, vpn, level)
        path = entry_path(vpn, level)
        if mmu.pwc_lookup(level, path) is not None:
            lat, src = pwc_lat, "PWC"
        else:
            mem_lat, src = hierarchy.access(addr, start + elapsed + pwc_lat, WALK)
            lat = pwc_lat + mem_lat
            child = table.frame(vpn, level - 1)
            mmu.pwc_insert(level, path, child)
        steps.append(WalkStep(level, addr, src, lat))
        elapsed += lat

    leaf = table.frame(vpn, 1)
    addr = pt_entry_address(leaf, vpn)
    pt_hit = pt_spec is not None and leaf in pt_spec
    if pt_hit:
        lat = max(0, pt_spec[leaf] - (start + elapsed))
        src = "SPEC"
    else:
        lat, src = hierarchy.access(addr, start + elapsed, WALK)
    steps.append(WalkStep(1, addr, src, lat))
    elapsed += lat
    return WalkResult(table.leaves[vpn], elapsed, leaf, steps, pt_hit)


class NestedPageTable:
    """Guest page table (gVA -> gPA) over a nested table (gPA -> hPA).

    Data pages are backed in host memory by tiered hash allocation keyed
    on the guest virtual page number, so host frames are predictable
    from gVPN alone.  Guest frames and guest table frames come from the
    guest's conventional allocator; their host backing frames come from
    the host fallback allocator.
    """

    def __init__(self, guest_mem: PhysMem, host_mem: PhysMem, host_policy: HashPolicy) -> None:
        self.guest = RadixPageTable()
        self.host = RadixPageTable()
        self.guest_mem = guest_mem
        self.host_mem = host_mem
        self.host_policy = host_policy
        self.outcomes: dict[int, AllocationOutcome] = {}

    @property
    def leaves(self) -> dict[int, int]:
        """gVPN -> hPPN for every mapped guest page."""
        return {g: self.host.leaves[gp] for g, gp in self.guest.leaves.items()}

    def is_mapped(self, gvpn: int) -> bool:
        return gvpn in self.guest.leaves

    def translate(self, gvpn: int) -> int:
        try:
            return self.host.leaves[self.guest.leaves[gvpn]]
        except KeyError:
            raise PageFault(gvpn) from None

    def _back(self, gppn: int, hppn: int) -> None:
        self.host.install(self.host_mem, self.host_policy, gppn, hppn)

    def map_page(self, gvpn: int) -> AllocationOutcome:
        if gvpn in self.guest.leaves:
            raise AlreadyMappedError(f"gvpn {gvpn:#x} already mapped")
        gppn = self.guest_mem.fallback_alloc()
        for gframe in self.guest.install(self.guest_mem, None, gvpn, gppn):
            self._back(gframe, self.host_mem.fallback_alloc())
        out = tiered_allocate(self.host_policy, self.host_mem, gvpn)
        self._back(gppn, out.ppn)
        self.outcomes[gvpn] = out
        return out

    def contents(self):
        return self.guest.contents(), self.host.contents()


def _host_walk(nested: NestedPageTable, gppn: int, hierarchy, now: int, steps: list[WalkStep]) -> tuple[int, int]:
    elapsed = 0
    host = nested.host
    for level in range(LEVELS, 0, -1):
        addr = entry_address(host.frame(gppn, level), gppn, level)
        lat, src = hierarchy.access(addr, now + elapsed, WALK)
        steps.append(WalkStep(level, addr, src, lat, nested=True))
        elapsed += lat
    return host.leaves[gppn], elapsed


def nested_walk(nested: NestedPageTable, gvpn: int, mmu: MmuState, hierarchy, start: int = 0) -> WalkResult:
    """Two-dimensional walk: up to 4 * (4 + 1) + 4 = 24 entry reads.

    Each guest table frame's gPA is translated through the nTLB; a miss
    costs a 4-access nested walk.  The final data gPA always takes a full
    nested walk.
    """
    guest = nested.guest
    if gvpn not in guest.leaves:
        raise PageFault(gvpn)
    elapsed = 0
    steps: list[WalkStep] = []
    leaf_h = -1
    for level in range(LEVELS, 0, -1):
        gframe = guest.frame(gvpn, level)
        hframe = mmu.ntlb.lookup(gframe)
        if hframe is None:
            hframe, lat = _host_walk(nested, gframe, hierarchy, start + elapsed, steps)
            elapsed += lat
            mmu.ntlb.insert(gframe, hframe)
        addr = entry_address(hframe, gvpn, level)
        lat, src = hierarchy.access(addr, start + elapsed, WALK)
        steps.append(WalkStep(level, addr, src, lat))
        elapsed += lat
        if level == 1:
            leaf_h = hframe
    hppn, lat = _host_walk(nested, guest.leaves[gvpn], hierarchy, start + elapsed, steps)
    elapsed += lat
    return WalkResult(hppn, elapsed, leaf_h, steps)
