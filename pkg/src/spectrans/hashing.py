"""Shared hash family and tiered hash-based frame allocation.

The OS allocator and the hardware speculation engine use one base mixer
(the 64-bit murmur3 finaliser) and derive every tier from it by XOR-ing
the key with a per-tier seed.  Because both sides read the same
:class:`HashPolicy`, the candidate frames generated at translation time
are exactly the frames the allocator probed at fault time.

Tier numbers are 1-based; :data:`FALLBACK` (0) marks an allocation that
fell through to the conventional allocator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Protocol

import numpy as np

from .errors import ConfigError

MASK64 = (1 << 64) - 1
C1 = 0xFF51AFD7ED558CCD
C2 = 0xC4CEB9FE1A85EC53
GOLDEN = 0x9E3779B97F4A7C15

FALLBACK = 0
PT_KEY_SHIFT = 9


def mix64(x: int) -> int:
    x &= MASK64
    x ^= x >> 33
    x = (x * C1) & MASK64
    x ^= x >> 33
    x = (x * C2) & MASK64
    x ^= x >> 33
    return x


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorised :func:`mix64` over a uint64 array (wrapping multiply)."""
    x = np.asarray(x, dtype=np.uint64).copy()
    with np.errstate(over="ignore"):
        x ^= x >> np.uint64(33)
        x *= np.uint64(C1)
        x ^= x >> np.uint64(33)
        x *= np.uint64(C2)
        x ^= x >> np.uint64(33)
    return x


def derive_seeds(master_seed: int, count: int) -> list[int]:
    """Counter-mode seeds: seed_i = mix64(master + i * golden), i = 1..count.

    mix64 is a bijection, so distinct counters give distinct seeds.  The
    construction is prefix-stable: the first k seeds do not depend on
    ``count``.
    """
    return [mix64((master_seed + i * GOLDEN) & MASK64) for i in range(1, count + 1)]


class FramePool(Protocol):
    def is_free(self, ppn: int) -> bool: ...
    def claim(self, ppn: int) -> None: ...
    def fallback_alloc(self) -> int: ...


@dataclass(frozen=True)
class HashPolicy:
    """N hash tiers over a pool of ``total_frames`` frames.

    With ``table`` set the policy is a stub: ``hash(tier, key)`` is read
    from the mapping instead of computed.  Stubs exist for replaying
    hand-written scenarios in tests.
    """

    tiers: int
    total_frames: int
    seeds: tuple[int, ...] = ()
    table: Mapping[tuple[int, int], int] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.tiers < 1:
            raise ConfigError(f"tier count must be >= 1, got {self.tiers}")
        if self.total_frames < 1:
            raise ConfigError("total_frames must be >= 1")
        if self.table is None:
            if len(self.seeds) != self.tiers:
                raise ConfigError(f"need {self.tiers} seeds, got {len(self.seeds)}")
            if len(set(self.seeds)) != len(self.seeds):
                raise ConfigError("hash seeds must be pairwise distinct")

    @classmethod
    def from_master(cls, tiers: int, total_frames: int, master_seed: int = 0x5EED) -> "HashPolicy":
        return cls(tiers, total_frames, tuple(derive_seeds(master_seed, tiers)))

    @classmethod
    def stub(cls, table: Mapping[tuple[int, int], int], tiers: int, total_frames: int) -> "HashPolicy":
        return cls(tiers, total_frames, table=dict(table))

    @property
    def is_stub(self) -> bool:
        return self.table is not None

    def hash(self, tier: int, key: int) -> int:
        if not 1 <= tier <= self.tiers:
            raise ValueError(f"tier {tier} outside [1, {self.tiers}]")
        if self.table is not None:
            try:
                return self.table[(tier, key)]
            except KeyError:
                raise KeyError(f"stub policy has no entry for tier {tier}, key {key:#x}") from None
        return mix64(key ^ self.seeds[tier - 1]) % self.total_frames

    def hash_many(self, tier: int, keys: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`hash` for the production mixer."""
        if self.table is not None:
            return np.array([self.hash(tier, int(k)) for k in keys], dtype=np.int64)
        if not 1 <= tier <= self.tiers:
            raise ValueError(f"tier {tier} outside [1, {self.tiers}]")
        x = np.asarray(keys, dtype=np.uint64) ^ np.uint64(self.seeds[tier - 1])
        return (mix64_array(x) % np.uint64(self.total_frames)).astype(np.int64)

    def targets(self, key: int, count: int | None = None) -> list[int]:
        n = self.tiers if count is None else count
        return [self.hash(i, key) for i in range(1, n + 1)]


@dataclass(frozen=True)
class AllocationOutcome:
    ppn: int
    tier: int  # 1..N, or FALLBACK

    @property
    def hashed(self) -> bool:
        return self.tier != FALLBACK


def probe_tier(policy: HashPolicy, mem: FramePool, key: int) -> int:
    """Tier whose target is free for ``key``, or FALLBACK.  Claims nothing."""
    for i in range(1, policy.tiers + 1):
        if mem.is_free(policy.hash(i, key)):
            return i
    return FALLBACK


def tiered_allocate(policy: HashPolicy, mem: FramePool, vpn: int) -> AllocationOutcome:
    for i in range(1, policy.tiers + 1):
        ppn = policy.hash(i, vpn)
        if mem.is_free(ppn):
            mem.claim(ppn)
            return AllocationOutcome(ppn, i)
    return AllocationOutcome(mem.fallback_alloc(), FALLBACK)


def pt_key(vpn: int) -> int:
    """Hash key of the last-level page-table frame covering ``vpn``."""
    return vpn >> PT_KEY_SHIFT


def allocate_pt_frame(policy: HashPolicy, mem: FramePool, vpn: int) -> AllocationOutcome:
    return tiered_allocate(policy, mem, pt_key(vpn))


@dataclass(frozen=True)
class AnalyticModel:
    p: float
    tiers: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"occupancy ratio must be in [0, 1], got {self.p}")
        if self.tiers < 1:
            raise ValueError("tier count must be >= 1")


def success_probability(model: AnalyticModel) -> float:
    return 1.0 - model.p**model.tiers


def tier_probability(model: AnalyticModel, i: int) -> float:
    if not 1 <= i <= model.tiers:
        raise ValueError(f"tier {i} outside [1, {model.tiers}]")
    return model.p ** (i - 1) * (1.0 - model.p)


def fallback_probability(model: AnalyticModel) -> float:
    return model.p**model.tiers
