"""Set-associative LRU caches and the MMU's TLB / page-walk-cache front end.

Geometry follows the baseline configuration: a 64-entry 4-way L1 DTLB
(1 cycle), a 2048-entry 16-way L2 TLB (12 cycles), and three 32-entry
4-way page walk caches (2 cycles), one per non-leaf level.  The set index
is the low-order bits of the key.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Any

from .errors import ConfigError


class SetAssocCache:
    """``entries``-entry, ``ways``-way cache with true LRU per set.

    Keys must be non-negative ints (the set index is ``key % sets``).
    Each set is an OrderedDict with the MRU entry last.
    """

    def __init__(self, entries: int, ways: int, latency: int = 0, name: str = "") -> None:
        if entries < 1 or ways < 1 or entries % ways:
            raise ConfigError(f"{name or 'cache'}: entries ({entries}) must be a positive multiple of ways ({ways})")
        self.entries = entries
        self.ways = ways
        self.sets = entries // ways
        self.latency = latency
        self.name = name
        self._sets: list[OrderedDict[int, Any]] = [OrderedDict() for _ in range(self.sets)]

    def lookup(self, key: int) -> Any:
        """Value for ``key`` (refreshing recency) or None on a miss."""
        s = self._sets[key % self.sets]
        if key in s:
            s.move_to_end(key)
            return s[key]
        return None

    def contains(self, key: int) -> bool:
        return key in self._sets[key % self.sets]

    def insert(self, key: int, value: Any = True) -> int | None:
        """Insert or refresh ``key``; return the evicted key, if any."""
        s = self._sets[key % self.sets]
        if key in s:
            s.move_to_end(key)
            s[key] = value
            return None
        victim = None
        if len(s) >= self.ways:
            victim, _ = s.popitem(last=False)
        s[key] = value
        return victim

    def invalidate(self, key: int) -> bool:
        return self._sets[key % self.sets].pop(key, None) is not None

    def set_contents(self, index: int) -> list[int]:
        """Keys of one set, LRU first."""
        return list(self._sets[index])

    def __len__(self) -> int:
        return sum(len(s) for s in self._sets)

    def keys(self) -> list[int]:
        return [k for s in self._sets for k in s]


L1_TLB = (64, 4, 1)
L2_TLB = (2048, 16, 12)
PWC = (32, 4, 2)
NTLB = (64, 64, 0)

# non-leaf page-table levels; level 1 is the leaf
PWC_LEVELS = (4, 3, 2)


@dataclass(frozen=True)
class TlbResult:
    hit: bool
    latency: int
    ppn: int | None = None
    level: str = ""  # "L1", "L2" or "" on a miss


@dataclass
class TlbStats:
    l1_hits: int = 0
    l2_hits: int = 0
    misses: int = 0


class MmuState:
    def __init__(self) -> None:
        self.l1_dtlb = SetAssocCache(*L1_TLB, name="l1_dtlb")
        self.l2_tlb = SetAssocCache(*L2_TLB, name="l2_tlb")
        self.pwcs = {lvl: SetAssocCache(*PWC, name=f"pwc{lvl}") for lvl in PWC_LEVELS}
        self.ntlb = SetAssocCache(*NTLB, name="ntlb")
        self.stats = TlbStats()

    def tlb_lookup(self, vpn: int) -> TlbResult:
        ppn = self.l1_dtlb.lookup(vpn)
        if ppn is not None:
            self.stats.l1_hits += 1
            return TlbResult(True, self.l1_dtlb.latency, ppn, "L1")
        latency = self.l1_dtlb.latency + self.l2_tlb.latency
        ppn = self.l2_tlb.lookup(vpn)
        if ppn is not None:
            self.stats.l2_hits += 1
            self.l1_dtlb.insert(vpn, ppn)
            return TlbResult(True, latency, ppn, "L2")
        self.stats.misses += 1
        return TlbResult(False, latency)

    def tlb_insert(self, vpn: int, ppn: int) -> None:
        self.l2_tlb.insert(vpn, ppn)
        self.l1_dtlb.insert(vpn, ppn)

    def pwc_lookup(self, level: int, path: int) -> int | None:
        """Cached next-level frame for the level-``level`` entry at ``path``."""
        if level not in self.pwcs:
            return None
        return self.pwcs[level].lookup(path)

    def pwc_insert(self, level: int, path: int, frame: int) -> None:
        if level in self.pwcs:
            self.pwcs[level].insert(path, frame)

    @property
    def pwc_latency(self) -> int:
        return PWC[2]


def mpki(misses: int, instructions: int) -> float:
    if instructions <= 0:
        raise ValueError("instruction count must be positive")
    return misses * 1000.0 / instructions
