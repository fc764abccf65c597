"""Simulation configuration.

Configuration files are line-oriented ``key = value`` text; ``#`` starts a
comment.  Keys are dotted paths into :class:`SimConfig`, e.g.
``pressure``, ``spec.n_max``, ``mem.dram_mts``, ``trace.kind``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Iterable

from .engine import SpecConfig
from .errors import ConfigError
from .hierarchy import HierarchyConfig

MODES = ("native", "nested", "speculation-off", "nested-off", "perfect-speculation")
TRACE_KINDS = ("uniform", "zipf", "sequential", "pointer-chase", "file")


@dataclass
class TraceConfig:
    kind: str = "uniform"
    pages: int = 16384
    accesses: int = 100_000
    instr: int = 10
    zipf_s: float = 1.0
    lines_per_page: int = 1
    path: str = ""


@dataclass
class SimConfig:
    frames: int = 1 << 20
    pressure: float = 0.0
    seed: int = 1
    master_seed: int = 0x5EED
    mode: str = "native"
    warmup: int = 0
    spec: SpecConfig = field(default_factory=SpecConfig)
    mem: HierarchyConfig = field(default_factory=HierarchyConfig)
    trace: TraceConfig = field(default_factory=TraceConfig)

    def validate(self) -> None:
        if self.frames < 1:
            raise ConfigError("frames must be >= 1")
        if not 0.0 <= self.pressure <= 1.0:
            raise ConfigError("pressure must be in [0, 1]")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        if self.warmup < 0:
            raise ConfigError("warmup must be >= 0")
        self.spec.validate()
        if self.trace.kind not in TRACE_KINDS:
            raise ConfigError(f"trace.kind must be one of {', '.join(TRACE_KINDS)}")
        if self.trace.kind == "file" and not self.trace.path:
            raise ConfigError("trace.kind = file needs trace.path")
        if self.trace.pages < 1 or self.trace.accesses < 0:
            raise ConfigError("trace.pages must be >= 1 and trace.accesses >= 0")
        if not 1 <= self.trace.lines_per_page <= 64:
            raise ConfigError("trace.lines_per_page must be in [1, 64]")
        m = self.mem
        if min(m.dram_latency, m.window) < 1 or m.dram_mts <= 0 or m.cpu_ghz <= 0:
            raise ConfigError("mem.dram_latency, mem.window, mem.dram_mts and mem.cpu_ghz must be positive")
        if not 0.0 < m.ewma_alpha <= 1.0:
            raise ConfigError("mem.ewma_alpha must be in (0, 1]")

    def copy(self) -> "SimConfig":
        return dataclasses.replace(
            self,
            spec=dataclasses.replace(self.spec),
            mem=dataclasses.replace(self.mem),
            trace=dataclasses.replace(self.trace),
        )


def _coerce(raw: str, current: Any, key: str) -> Any:
    s = raw.strip()
    try:
        if isinstance(current, bool):
            low = s.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(s)
        if isinstance(current, int):
            return int(s, 0)
        if isinstance(current, float):
            return float(s)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {type(current).__name__}") from None
    return s


def set_key(config: SimConfig, key: str, value: str) -> None:
    target: Any = config
    parts = key.strip().split(".")
    for part in parts[:-1]:
        if not dataclasses.is_dataclass(target) or not hasattr(target, part):
            raise ConfigError(f"unknown config key {key!r}")
        target = getattr(target, part)
    leaf = parts[-1]
    if not dataclasses.is_dataclass(target) or leaf not in {f.name for f in dataclasses.fields(target)}:
        raise ConfigError(f"unknown config key {key!r}")
    current = getattr(target, leaf)
    if dataclasses.is_dataclass(current):
        raise ConfigError(f"{key!r} is a section, not a value")
    setattr(target, leaf, _coerce(value, current, key))


def apply_overrides(config: SimConfig, pairs: Iterable[str]) -> SimConfig:
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        k, v = pair.split("=", 1)
        set_key(config, k, v)
    return config


def parse_config(text: str, base: SimConfig | None = None) -> SimConfig:
    config = base.copy() if base else SimConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        k, v = s.split("=", 1)
        set_key(config, k, v)
    return config


def load_config(path: str) -> SimConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def flatten(config: Any, prefix: str = "") -> list[tuple[str, Any]]:
    items = []
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if dataclasses.is_dataclass(value):
            items += flatten(value, f"{prefix}{f.name}.")
        else:
            items.append((prefix + f.name, value))
    return items


def format_config(config: SimConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in flatten(config))
