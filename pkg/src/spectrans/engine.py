"""Hardware speculation engine.

On an L2 TLB miss the engine hashes the VPN with the OS's policy, issues
speculative fetches for up to ``n_eff`` candidate data lines and for the
predicted last-level PTE, and lets the walk run in parallel.  When the
walk resolves, the resolved frame is compared against the hash outputs
to learn which tier the OS used; those per-tier counters drive the
speculation-degree filter together with DRAM bandwidth utilisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .hashing import FALLBACK, HashPolicy, pt_key
from .hierarchy import DEMAND, SPECULATIVE, Hierarchy
from .mem import PAGE_SHIFT, PAGE_SIZE
from .pagetable import NestedPageTable, RadixPageTable, nested_walk, pt_entry_address, walk
from .tlb import MmuState


@dataclass
class SpecConfig:
    n_max: int = 6
    k_pt: int = 1
    filter: bool = True
    theta: float = 0.95
    bw_hi: float = 0.85
    bw_lo: float = 0.50
    data: bool = True
    pt: bool = True

    def validate(self) -> None:
        if self.n_max < 1:
            raise ConfigError("spec.n_max must be >= 1")
        if not 1 <= self.k_pt <= self.n_max:
            raise ConfigError("spec.k_pt must be in [1, spec.n_max]")
        if not 0.0 <= self.bw_lo < self.bw_hi <= 1.0:
            raise ConfigError("need 0 <= spec.bw_lo < spec.bw_hi <= 1")
        if not 0.0 < self.theta <= 1.0:
            raise ConfigError("spec.theta must be in (0, 1]")


@dataclass
class SpecState:
    n_max: int
    tier_success: list[int] = field(default_factory=list)
    fallback_count: int = 0
    n_eff: int = -1

    def __post_init__(self) -> None:
        if not self.tier_success:
            self.tier_success = [0] * self.n_max
        if self.n_eff < 0:
            self.n_eff = self.n_max


@dataclass
class SpecOutcome:
    issued: list[tuple[int, int]] = field(default_factory=list)  # (paddr, tier)
    hit_tier: int | None = None
    pt_issued: list[int] = field(default_factory=list)
    pt_hit: bool = False

    @property
    def wasted_fetches(self) -> int:
        return len(self.issued) - (1 if self.hit_tier is not None else 0)


def generate_candidates(policy: HashPolicy, vpn: int, n_eff: int, offset: int = 0) -> list[int]:
    if n_eff > policy.tiers:
        raise ValueError(f"n_eff {n_eff} exceeds tier count {policy.tiers}")
    return [policy.hash(i, vpn) * PAGE_SIZE + offset for i in range(1, n_eff + 1)]


def generate_pt_candidate(policy: HashPolicy, vpn: int, k_pt: int = 1) -> list[int]:
    key = pt_key(vpn)
    return [pt_entry_address(policy.hash(i, key), vpn) for i in range(1, k_pt + 1)]


def pressure_target(state: SpecState, theta: float) -> int:
    """Smallest tier count whose cumulative confirmed share reaches ``theta``."""
    total = sum(state.tier_success) + state.fallback_count
    if total == 0:
        return state.n_max
    acc = 0
    for i, c in enumerate(state.tier_success, start=1):
        acc += c
        if acc >= theta * total:
            return i
    return state.n_max


def choose_degree(state: SpecState, config: SpecConfig, bw_utilization: float) -> int:
    if not config.filter:
        state.n_eff = config.n_max
        return state.n_eff
    n_p = pressure_target(state, config.theta)
    n = min(state.n_eff, n_p)
    u = min(max(bw_utilization, 0.0), 1.0)
    if u > config.bw_hi:
        n = max(n - 1, 0)
    elif u < config.bw_lo:
        n = min(n + 1, n_p)
    state.n_eff = n
    return n


def matching_tier(policy: HashPolicy, vpn: int, ppn: int, n: int | None = None) -> int:
    """Smallest tier i <= n with hash(i, vpn) == ppn, else FALLBACK."""
    for i in range(1, (policy.tiers if n is None else n) + 1):
        if policy.hash(i, vpn) == ppn:
            return i
    return FALLBACK


def confirm(state: SpecState, policy: HashPolicy, vpn: int, ppn: int) -> int:
    tier = matching_tier(policy, vpn, ppn, state.n_max)
    if tier == FALLBACK:
        state.fallback_count += 1
    else:
        state.tier_success[tier - 1] += 1
    return tier


@dataclass
class Translation:
    """Timing of one L2-TLB-miss access, relative to walk start."""

    ppn: int
    walk_latency: int
    data_latency: int
    data_level: str
    walk: object
    spec: SpecOutcome
    confirmed_tier: int | None = None


class SpeculationEngine:
    """Per-simulation speculation state plus the translate-with-overlap step.

    ``mode`` is one of "off", "hash" or "perfect".  Perfect speculation
    issues a single always-correct data candidate and, natively, the
    correct leaf PTE.
    """

    def __init__(self, policy: HashPolicy, config: SpecConfig, mode: str = "hash") -> None:
        config.validate()
        if config.n_max > policy.tiers:
            raise ConfigError("spec.n_max exceeds the allocator's tier count")
        self.policy = policy
        self.config = config
        self.mode = mode
        self.state = SpecState(config.n_max)
        self.last_utilization = 0.0

    def _issue(self, hierarchy: Hierarchy, paddr: int, t0: int) -> int:
        return hierarchy.completes_at(paddr, t0, SPECULATIVE)

    def translate(self, table: RadixPageTable | NestedPageTable, vpn: int, offset: int,
                  mmu: MmuState, hierarchy: Hierarchy, t0: int) -> Translation:
        """Resolve ``vpn`` with a walk starting at cycle ``t0``, speculating alongside."""
        nested = isinstance(table, NestedPageTable)
        out = SpecOutcome()
        data_done: dict[int, int] = {}
        pt_done: dict[int, int] | None = None
        cfg = self.config

        if self.mode == "hash":
            self.last_utilization = hierarchy.record_utilization(t0)
            n_eff = choose_degree(self.state, cfg, self.last_utilization)
            if cfg.pt and not nested:
                pt_done = {}
                for addr in generate_pt_candidate(self.policy, vpn, cfg.k_pt):
                    out.pt_issued.append(addr)
                    pt_done.setdefault(addr >> PAGE_SHIFT, self._issue(hierarchy, addr, t0))
            if cfg.data:
                for tier, addr in enumerate(generate_candidates(self.policy, vpn, n_eff, offset), start=1):
                    out.issued.append((addr, tier))
                    data_done.setdefault(addr >> PAGE_SHIFT, self._issue(hierarchy, addr, t0))
        elif self.mode == "perfect":
            hierarchy.record_utilization(t0)
            ppn = table.translate(vpn)
            if cfg.pt and not nested:
                leaf = table.leaf_frame(vpn)
                addr = pt_entry_address(leaf, vpn)
                out.pt_issued.append(addr)
                pt_done = {leaf: self._issue(hierarchy, addr, t0)}
            if cfg.data:
                addr = ppn * PAGE_SIZE + offset
                out.issued.append((addr, 1))
                data_done[ppn] = self._issue(hierarchy, addr, t0)
        else:
            hierarchy.record_utilization(t0)

        if nested:
            res = nested_walk(table, vpn, mmu, hierarchy, t0)
        else:
            res = walk(table, vpn, mmu, hierarchy, t0, pt_done)
        out.pt_hit = res.pt_hit
        ppn = res.ppn
        if ppn in data_done:
            out.hit_tier = next(t for a, t in out.issued if a >> PAGE_SHIFT == ppn)
        done = t0 + res.latency
        # a speculated line is found in L2 (or L1) and waits for the in-flight fetch
        data_latency, level = hierarchy.access(ppn * PAGE_SIZE + offset, done, DEMAND)
        tier = confirm(self.state, self.policy, vpn, ppn) if self.mode == "hash" else None
        return Translation(ppn, res.latency, data_latency, level, res, out, tier)
