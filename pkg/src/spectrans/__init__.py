"""Trace-driven simulator of OS-guided hash-based speculative address translation."""

from .config import SimConfig, load_config, parse_config
from .engine import SpecConfig, SpeculationEngine
from .hashing import FALLBACK, AllocationOutcome, AnalyticModel, HashPolicy, tiered_allocate
from .hierarchy import Hierarchy, HierarchyConfig
from .mem import PhysMem
from .pagetable import NestedPageTable, RadixPageTable
from .sim import RunStats, Simulator, report, run, sweep, to_csv
from .tlb import MmuState, SetAssocCache

__all__ = [
    "AllocationOutcome", "AnalyticModel", "FALLBACK", "HashPolicy", "Hierarchy", "HierarchyConfig",
    "MmuState", "NestedPageTable", "PhysMem", "RadixPageTable", "RunStats", "SetAssocCache",
    "SimConfig", "SpecConfig", "SpeculationEngine", "Simulator", "load_config", "parse_config",
    "report", "run", "sweep", "tiered_allocate", "to_csv",
]
