"""Trace-driven simulation runs, statistics and reports.

The modelled core is blocking: each memory access costs TLB lookup, a
walk on an L2 TLB miss, then the data access, and the clock advances by
that total.  ``I n`` trace events advance the clock by ``n`` cycles.
First-touch page faults are handled in zero simulated cycles.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .config import SimConfig, set_key
from .engine import SpeculationEngine
from .errors import ConfigError
from .hashing import FALLBACK, AnalyticModel, HashPolicy, success_probability
from .hierarchy import DEMAND, SPECULATIVE, WALK, Hierarchy
from .mem import PAGE_SHIFT, PAGE_SIZE, PhysMem
from .pagetable import NestedPageTable, RadixPageTable
from .tlb import MmuState, mpki
from .trace import InstrDelta, TraceEvent, gen_pointer_chase, gen_sequential, gen_uniform, gen_zipf, load_trace

SPEC_MODES = {"native": "hash", "nested": "hash", "perfect-speculation": "perfect"}

CSV_COLUMNS = (
    "mode", "pressure", "n_max", "filter", "dram_mts", "seed",
    "accesses", "instructions", "page_faults",
    "l1_tlb_hits", "l2_tlb_hits", "l2_tlb_misses", "l2_tlb_mpki",
    "walks", "avg_walk_latency", "p50_walk_latency", "p95_walk_latency", "p99_walk_latency",
    "avg_translation_latency", "avg_memory_access_latency",
    "spec_data_issued", "spec_data_hits", "spec_data_hit_rate", "spec_pt_issued", "spec_pt_hits",
    "wasted_fetches", "walks_on_hashed_pages", "hashed_walk_fraction",
    "alloc_hashed", "alloc_fallback", "alloc_success", "model_success",
    "tier_confirms", "fallback_confirms",
    "dram_bytes_demand", "dram_bytes_walk", "dram_bytes_spec", "spec_dram_fills", "queue_cycles",
    "bw_ewma_final", "mean_n_eff",
)


@dataclass
class RunStats:
    mode: str = ""
    pressure: float = 0.0
    n_max: int = 0
    filter: bool = False
    dram_mts: float = 0.0
    seed: int = 0
    accesses: int = 0
    instructions: int = 0
    page_faults: int = 0
    l1_tlb_hits: int = 0
    l2_tlb_hits: int = 0
    l2_tlb_misses: int = 0
    walks: int = 0
    walk_latency_sum: int = 0
    translation_latency_sum: int = 0
    memory_latency_sum: int = 0
    spec_data_issued: int = 0
    spec_data_hits: int = 0
    spec_pt_issued: int = 0
    spec_pt_hits: int = 0
    wasted_fetches: int = 0
    walks_on_hashed_pages: int = 0
    alloc_tiers: list[int] = field(default_factory=list)  # index 0 = fallback
    tier_confirms: list[int] = field(default_factory=list)
    fallback_confirms: int = 0
    dram_bytes_demand: int = 0
    dram_bytes_walk: int = 0
    dram_bytes_spec: int = 0
    spec_dram_fills: int = 0
    queue_cycles: int = 0
    walk_latencies: list[int] = field(default_factory=list, repr=False)
    n_eff_trace: list[int] = field(default_factory=list, repr=False)
    ewma_trace: list[float] = field(default_factory=list, repr=False)
    resolved: list[int] = field(default_factory=list, repr=False)

    @property
    def l2_tlb_mpki(self) -> float:
        return mpki(self.l2_tlb_misses, self.instructions) if self.instructions else 0.0

    @property
    def avg_walk_latency(self) -> float:
        return self.walk_latency_sum / self.walks if self.walks else 0.0

    @property
    def avg_translation_latency(self) -> float:
        return self.translation_latency_sum / self.accesses if self.accesses else 0.0

    @property
    def avg_memory_access_latency(self) -> float:
        return self.memory_latency_sum / self.accesses if self.accesses else 0.0

    @property
    def spec_data_hit_rate(self) -> float:
        return self.spec_data_hits / self.walks if self.walks else 0.0

    @property
    def hashed_walk_fraction(self) -> float:
        return self.walks_on_hashed_pages / self.walks if self.walks else 0.0

    @property
    def alloc_hashed(self) -> int:
        return sum(self.alloc_tiers[1:])

    @property
    def alloc_fallback(self) -> int:
        return self.alloc_tiers[0] if self.alloc_tiers else 0

    @property
    def alloc_success(self) -> float:
        total = sum(self.alloc_tiers)
        return self.alloc_hashed / total if total else 0.0

    @property
    def model_success(self) -> float:
        return success_probability(AnalyticModel(self.pressure, self.n_max))

    @property
    def mean_n_eff(self) -> float:
        return float(np.mean(self.n_eff_trace)) if self.n_eff_trace else 0.0

    @property
    def bw_ewma_final(self) -> float:
        return self.ewma_trace[-1] if self.ewma_trace else 0.0

    def walk_percentile(self, q: float) -> float:
        return float(np.percentile(self.walk_latencies, q)) if self.walk_latencies else 0.0

    def row(self) -> dict[str, object]:
        out: dict[str, object] = {}
        for col in CSV_COLUMNS:
            if col.startswith("p") and col.endswith("_walk_latency") and col[1:3].isdigit():
                value: object = self.walk_percentile(float(col[1:3]))
            elif col == "tier_confirms":
                value = ";".join(map(str, self.tier_confirms))
            else:
                value = getattr(self, col)
            out[col] = value
        return out


def _fmt(value: object) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def build_trace(config: SimConfig) -> Iterable[TraceEvent]:
    t = config.trace
    if t.kind == "uniform":
        return gen_uniform(t.pages, t.accesses, config.seed, t.instr)
    if t.kind == "zipf":
        return gen_zipf(t.pages, t.accesses, t.zipf_s, config.seed, t.instr)
    if t.kind == "sequential":
        return gen_sequential(t.pages, t.accesses, t.instr, lines_per_page=t.lines_per_page)
    if t.kind == "pointer-chase":
        return gen_pointer_chase(t.pages, t.accesses, config.seed, t.instr)
    return load_trace(t.path)


class Simulator:
    """One self-contained simulation instance."""

    def __init__(self, config: SimConfig, events: Iterable[TraceEvent] | None = None,
                 keep_resolved: bool = False, policy: HashPolicy | None = None) -> None:
        config.validate()
        self.config = config
        self.policy = policy or HashPolicy.from_master(config.spec.n_max, config.frames, config.master_seed)
        self.mem = PhysMem(config.frames)
        self.mem.inject_pressure(config.pressure, config.seed)
        self.nested = config.mode in ("nested", "nested-off")
        if self.nested:
            self.guest_mem = PhysMem(config.frames)
            self.table: RadixPageTable | NestedPageTable = NestedPageTable(self.guest_mem, self.mem, self.policy)
        else:
            self.table = RadixPageTable()
        self.mmu = MmuState()
        self.hier = Hierarchy(config.mem)
        self.engine = SpeculationEngine(self.policy, config.spec, SPEC_MODES.get(config.mode, "off"))
        self.events = events
        self.keep_resolved = keep_resolved

    def _fault(self, vpn: int):
        if self.nested:
            return self.table.map_page(vpn)
        return self.table.map_page(self.mem, self.policy, vpn)

    def _outcomes(self):
        return self.table.outcomes

    def run(self) -> RunStats:
        cfg = self.config
        st = RunStats(mode=cfg.mode, pressure=cfg.pressure, n_max=cfg.spec.n_max, filter=cfg.spec.filter,
                      dram_mts=cfg.mem.dram_mts, seed=cfg.seed)
        st.alloc_tiers = [0] * (self.policy.tiers + 1)
        st.tier_confirms = [0] * cfg.spec.n_max
        events = self.events if self.events is not None else build_trace(cfg)
        mmu, hier, engine, table = self.mmu, self.hier, self.engine, self.table
        outcomes = self._outcomes()
        warmup = cfg.warmup
        seen = 0
        now = 0
        bw = hier.bw
        before = None
        for ev in events:
            if type(ev) is InstrDelta:
                now += ev.count
                if seen >= warmup:
                    st.instructions += ev.count
                continue
            measure = seen >= warmup
            if measure and before is None:
                before = (dict(bw.bytes_by_kind), bw.fills_by_kind[SPECULATIVE], hier.queue_cycles)
            seen += 1
            vpn = ev.va >> PAGE_SHIFT
            off = ev.va & (PAGE_SIZE - 1)
            if not table.is_mapped(vpn):
                out = self._fault(vpn)
                st.alloc_tiers[out.tier] += 1
                if measure:
                    st.page_faults += 1
            r = mmu.tlb_lookup(vpn)
            if r.hit:
                ppn = r.ppn
                trans = r.latency
                data, _ = hier.access(ppn * PAGE_SIZE + off, now + trans, DEMAND)
            else:
                tr = engine.translate(table, vpn, off, mmu, hier, now + r.latency)
                ppn = tr.ppn
                mmu.tlb_insert(vpn, ppn)
                trans = r.latency + tr.walk_latency
                data = tr.data_latency
                if measure:
                    sp = tr.spec
                    st.walks += 1
                    st.walk_latency_sum += tr.walk_latency
                    st.walk_latencies.append(tr.walk_latency)
                    st.spec_data_issued += len(sp.issued)
                    st.spec_data_hits += sp.hit_tier is not None
                    st.spec_pt_issued += len(sp.pt_issued)
                    st.spec_pt_hits += sp.pt_hit
                    st.wasted_fetches += sp.wasted_fetches
                    st.walks_on_hashed_pages += outcomes[vpn].tier != FALLBACK
                    if tr.confirmed_tier is not None:
                        if tr.confirmed_tier == FALLBACK:
                            st.fallback_confirms += 1
                        else:
                            st.tier_confirms[tr.confirmed_tier - 1] += 1
                    st.n_eff_trace.append(engine.state.n_eff if engine.mode == "hash" else len(sp.issued))
                    st.ewma_trace.append(engine.last_utilization if engine.mode == "hash" else bw.utilization_ewma)
            if measure:
                st.accesses += 1
                if r.hit:
                    if r.level == "L1":
                        st.l1_tlb_hits += 1
                    else:
                        st.l2_tlb_hits += 1
                else:
                    st.l2_tlb_misses += 1
                st.translation_latency_sum += trans
                st.memory_latency_sum += trans + data
                if self.keep_resolved:
                    st.resolved.append(ppn)
            now += trans + data
        if before is not None:
            bytes0, fills0, q0 = before
            st.dram_bytes_demand = bw.bytes_by_kind[DEMAND] - bytes0[DEMAND]
            st.dram_bytes_walk = bw.bytes_by_kind[WALK] - bytes0[WALK]
            st.dram_bytes_spec = bw.bytes_by_kind[SPECULATIVE] - bytes0[SPECULATIVE]
            st.spec_dram_fills = bw.fills_by_kind[SPECULATIVE] - fills0
            st.queue_cycles = hier.queue_cycles - q0
        self.now = now
        return st


def run(config: SimConfig, events: Iterable[TraceEvent] | None = None) -> RunStats:
    return Simulator(config, events).run()


AXES = {"pressure": "pressure", "n_max": "spec.n_max", "bandwidth": "mem.dram_mts"}


def _run_point(args: tuple[SimConfig, str, str]) -> RunStats:
    base, key, value = args
    cfg = base.copy()
    set_key(cfg, key, value)
    if key == "spec.n_max" and cfg.spec.k_pt > cfg.spec.n_max:
        cfg.spec.k_pt = cfg.spec.n_max
    return run(cfg)


def sweep(base: SimConfig, axis: str, values: Sequence[object], jobs: int = 1) -> list[RunStats]:
    """One run per axis value, returned in the order of ``values``."""
    key = AXES.get(axis, axis)
    points = [(base, key, str(v)) for v in values]
    for p in points:  # fail fast on bad keys or values
        cfg = base.copy()
        set_key(cfg, key, p[2])
        cfg.validate()
    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_point, points))
    return [_run_point(p) for p in points]


def to_csv(stats: Sequence[RunStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s in stats:
        row = s.row()
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def report(stats: Sequence[RunStats] | RunStats, fmt: str = "human") -> str:
    if isinstance(stats, RunStats):
        stats = [stats]
    if fmt == "csv":
        return to_csv(stats)
    if fmt == "json-lines":
        return "".join(json.dumps(s.row(), sort_keys=False) + "\n" for s in stats)
    if fmt != "human":
        raise ConfigError(f"unknown report format {fmt!r}")
    blocks = []
    for s in stats:
        lines = [
            f"mode                       {s.mode}",
            f"pressure / N               {s.pressure:.2f} / {s.n_max}",
            f"accesses / instructions    {s.accesses} / {s.instructions}",
            f"L1 / L2 TLB hits, misses   {s.l1_tlb_hits} / {s.l2_tlb_hits}, {s.l2_tlb_misses}",
            f"L2 TLB MPKI                {s.l2_tlb_mpki:.3f}",
            f"walks                      {s.walks}",
            f"avg walk latency           {s.avg_walk_latency:.2f} cy (p50 {s.walk_percentile(50):.0f}, p99 {s.walk_percentile(99):.0f})",
            f"avg translation latency    {s.avg_translation_latency:.2f} cy",
            f"avg memory access latency  {s.avg_memory_access_latency:.2f} cy",
            f"spec data hits / issued    {s.spec_data_hits} / {s.spec_data_issued} (hit rate {s.spec_data_hit_rate:.4f})",
            f"spec PT hits / issued      {s.spec_pt_hits} / {s.spec_pt_issued}",
            f"wasted fetches             {s.wasted_fetches}",
            f"allocation success         model {s.model_success:.4f}   measured {s.alloc_success:.4f}",
            f"per-tier allocations       {';'.join(map(str, s.alloc_tiers[1:]))} (fallback {s.alloc_fallback})",
            f"DRAM bytes demand/walk/spec {s.dram_bytes_demand} / {s.dram_bytes_walk} / {s.dram_bytes_spec}",
            f"bandwidth EWMA (final)     {s.bw_ewma_final:.4f}",
        ]
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)
