"""Physical-address data path: L1D, L2, LLC and a fixed-latency DRAM.

Probes are serial, so a hit at level k costs the sum of the tag latencies
of levels 1..k; a DRAM access adds the DRAM latency plus any queueing
delay on the single DRAM channel.  Demand and walk accesses fill every
level above the hit level.  Speculative accesses never touch L1: they
check it without updating recency and fill only L2 and the LLC.

Lines filled by an access that has not completed yet are tracked as
in-flight, so a later access to the same line waits for the earlier one
instead of observing an instantaneous hit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .tlb import SetAssocCache

LINE_SIZE = 64
LINE_SHIFT = 6

DEMAND = "demand"
WALK = "walk"
SPECULATIVE = "speculative"
KINDS = (DEMAND, WALK, SPECULATIVE)


@dataclass
class HierarchyConfig:
    l1_bytes: int = 32 * 1024
    l1_ways: int = 8
    l1_latency: int = 4
    l2_bytes: int = 1024 * 1024
    l2_ways: int = 16
    l2_latency: int = 12
    llc_bytes: int = 2 * 1024 * 1024
    llc_ways: int = 16
    llc_latency: int = 35
    dram_latency: int = 120
    # DDR4-2400 on a 64-bit bus, 2.9 GHz core clock
    dram_mts: float = 2400.0
    bus_bytes: int = 8
    cpu_ghz: float = 2.9
    window: int = 1024
    ewma_alpha: float = 1 / 16
    contention: bool = True

    @property
    def peak_bytes_per_cycle(self) -> float:
        return self.dram_mts * 1e6 * self.bus_bytes / (self.cpu_ghz * 1e9)


class BandwidthMeter:
    """DRAM traffic accounting with a windowed utilisation EWMA.

    Utilisation of a window is bytes charged in it divided by the bytes
    the channel could move in ``window_cycles``; it may exceed 1 when
    requests are queued.  Windows with no traffic fold in as 0.
    """

    def __init__(self, peak_bytes_per_cycle: float, window_cycles: int = 1024, alpha: float = 1 / 16) -> None:
        self.peak_bytes_per_cycle = peak_bytes_per_cycle
        self.window_cycles = window_cycles
        self.alpha = alpha
        self.window_start = 0
        self.bytes_in_window = 0
        self.utilization_ewma = 0.0
        self.bytes_by_kind = {k: 0 for k in KINDS}
        self.fills_by_kind = {k: 0 for k in KINDS}

    @property
    def total_bytes(self) -> int:
        return sum(self.bytes_by_kind.values())

    def _roll(self, now: int) -> None:
        elapsed = (now - self.window_start) // self.window_cycles
        if elapsed <= 0:
            return
        capacity = self.window_cycles * self.peak_bytes_per_cycle
        keep = 1.0 - self.alpha
        self.utilization_ewma = keep * self.utilization_ewma + self.alpha * (self.bytes_in_window / capacity)
        # the remaining elapsed windows were empty
        if elapsed > 1:
            self.utilization_ewma *= keep ** (elapsed - 1)
        self.bytes_in_window = 0
        self.window_start += elapsed * self.window_cycles

    def charge(self, nbytes: int, now: int, kind: str = DEMAND) -> None:
        self._roll(now)
        self.bytes_in_window += nbytes
        self.bytes_by_kind[kind] += nbytes
        self.fills_by_kind[kind] += 1

    def record_utilization(self, now: int) -> float:
        """Fold every completed window up to ``now`` and return the EWMA."""
        self._roll(now)
        return self.utilization_ewma


class Hierarchy:
    LEVELS = ("L1", "L2", "LLC", "DRAM")

    def __init__(self, config: HierarchyConfig | None = None) -> None:
        cfg = config or HierarchyConfig()
        self.config = cfg
        self.l1d = SetAssocCache(cfg.l1_bytes // LINE_SIZE, cfg.l1_ways, cfg.l1_latency, "l1d")
        self.l2 = SetAssocCache(cfg.l2_bytes // LINE_SIZE, cfg.l2_ways, cfg.l2_latency, "l2")
        self.llc = SetAssocCache(cfg.llc_bytes // LINE_SIZE, cfg.llc_ways, cfg.llc_latency, "llc")
        self.dram_latency = cfg.dram_latency
        self.bw = BandwidthMeter(cfg.peak_bytes_per_cycle, cfg.window, cfg.ewma_alpha)
        self.contention = cfg.contention
        self.service_cycles = math.ceil(LINE_SIZE / cfg.peak_bytes_per_cycle)
        self.channel_free_at = 0
        self.queue_cycles = 0
        self._inflight: dict[int, int] = {}

    def hit_latency(self, level: str) -> int:
        lat = self.l1d.latency
        if level == "L1":
            return lat
        lat += self.l2.latency
        if level == "L2":
            return lat
        lat += self.llc.latency
        if level == "LLC":
            return lat
        return lat + self.dram_latency

    def access(self, paddr: int, now: int, kind: str = DEMAND) -> tuple[int, str]:
        """Service one line access issued at cycle ``now``.

        Returns (latency, level that supplied the line).
        """
        line = paddr >> LINE_SHIFT
        spec = kind == SPECULATIVE
        latency = self.l1d.latency
        if spec:
            hit = self.l1d.contains(line)
        else:
            hit = self.l1d.lookup(line) is not None
        if hit:
            level = "L1"
        else:
            latency += self.l2.latency
            if self.l2.lookup(line) is not None:
                level = "L2"
            else:
                latency += self.llc.latency
                if self.llc.lookup(line) is not None:
                    level = "LLC"
                else:
                    level = "DRAM"
                    latency += self.dram_latency + self._queue(now + latency)
                    self.bw.charge(LINE_SIZE, now, kind)
                    self.llc.insert(line)
                self.l2.insert(line)
            if not spec:
                self.l1d.insert(line)

        pending = self._inflight.get(line)
        if pending is not None:
            if pending > now:
                latency = max(latency, pending - now)
            elif level != "DRAM":
                del self._inflight[line]
        if level == "DRAM":
            self._inflight[line] = now + latency
            if len(self._inflight) > 4096:
                self._prune(now)
        return latency, level

    def completes_at(self, paddr: int, issue_cycle: int, kind: str = DEMAND) -> int:
        latency, _ = self.access(paddr, issue_cycle, kind)
        return issue_cycle + latency

    def _queue(self, arrival: int) -> int:
        if not self.contention:
            return 0
        start = max(arrival, self.channel_free_at)
        self.channel_free_at = start + self.service_cycles
        wait = start - arrival
        self.queue_cycles += wait
        return wait

    def _prune(self, now: int) -> None:
        self._inflight = {k: v for k, v in self._inflight.items() if v > now}

    def record_utilization(self, now: int) -> float:
        return self.bw.record_utilization(now)
