"""Text traces and synthetic workload generators.

Grammar, one event per line::

    I <decimal count>     instructions retired since the previous event
    L 0x<hex address>     load from a 48-bit virtual address
    S 0x<hex address>     store

Blank lines and lines starting with ``#`` are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Union

import numpy as np

from .errors import TraceError
from .mem import PAGE_SIZE

VA_LIMIT = 1 << 48
DEFAULT_BASE_VA = 0x10_0000_0000


@dataclass(frozen=True)
class InstrDelta:
    count: int

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("instruction count must be >= 1")


@dataclass(frozen=True)
class Load:
    va: int

    def __post_init__(self) -> None:
        if not 0 <= self.va < VA_LIMIT:
            raise ValueError(f"virtual address {self.va:#x} is not 48-bit")


@dataclass(frozen=True)
class Store:
    va: int

    def __post_init__(self) -> None:
        if not 0 <= self.va < VA_LIMIT:
            raise ValueError(f"virtual address {self.va:#x} is not 48-bit")


TraceEvent = Union[InstrDelta, Load, Store]


def parse_line(text: str, lineno: int | None = None) -> TraceEvent | None:
    """Parse one line; returns None for blank and comment lines."""
    s = text.strip()
    if not s or s.startswith("#"):
        return None
    parts = s.split()
    if len(parts) != 2:
        raise TraceError(f"expected '<kind> <value>', got {s!r}", lineno)
    kind, value = parts
    try:
        if kind == "I":
            if not value.isdigit():
                raise ValueError(value)
            return InstrDelta(int(value))
        if kind in ("L", "S"):
            if not value.lower().startswith("0x"):
                raise ValueError(value)
            va = int(value, 16)
            return Load(va) if kind == "L" else Store(va)
    except ValueError as exc:
        raise TraceError(f"bad value in {s!r}: {exc}", lineno) from None
    raise TraceError(f"unknown event kind {kind!r}", lineno)


def format_event(event: TraceEvent) -> str:
    if isinstance(event, InstrDelta):
        return f"I {event.count}"
    if isinstance(event, Load):
        return f"L {event.va:#x}"
    return f"S {event.va:#x}"


def read_trace(stream: Iterable[str]) -> Iterator[TraceEvent]:
    for lineno, line in enumerate(stream, start=1):
        ev = parse_line(line, lineno)
        if ev is not None:
            yield ev


def load_trace(path: str) -> list[TraceEvent]:
    with open(path, encoding="utf-8") as fh:
        return list(read_trace(fh))


def write_trace(events: Iterable[TraceEvent], out: IO[str]) -> int:
    n = 0
    for ev in events:
        out.write(format_event(ev))
        out.write("\n")
        n += 1
    return n


def _emit(pages: np.ndarray, offsets: np.ndarray, base_va: int, instr: int) -> Iterator[TraceEvent]:
    for page, off in zip(pages.tolist(), offsets.tolist()):
        if instr:
            yield InstrDelta(instr)
        yield Load(base_va + page * PAGE_SIZE + off)


def gen_uniform(pages: int, accesses: int, seed: int, instr: int = 10,
                base_va: int = DEFAULT_BASE_VA) -> Iterator[TraceEvent]:
    """GUPS-like loads to uniformly random pages at random 8-byte offsets."""
    rng = np.random.default_rng(seed)
    page = rng.integers(0, pages, size=accesses)
    off = rng.integers(0, PAGE_SIZE // 8, size=accesses) * 8
    return _emit(page, off, base_va, instr)


def gen_zipf(pages: int, accesses: int, s: float, seed: int, instr: int = 10,
             base_va: int = DEFAULT_BASE_VA) -> Iterator[TraceEvent]:
    """Page popularity ~ 1/rank^s; ranks are scattered over the region."""
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, pages + 1, dtype=float) ** s
    ranks = rng.choice(pages, size=accesses, p=weights / weights.sum())
    page = rng.permutation(pages)[ranks]
    off = rng.integers(0, PAGE_SIZE // 8, size=accesses) * 8
    return _emit(page, off, base_va, instr)


def gen_sequential(pages: int, accesses: int, instr: int = 10,
                   base_va: int = DEFAULT_BASE_VA, lines_per_page: int = 1) -> Iterator[TraceEvent]:
    """Pages in ascending order, each visited once per pass.

    A visit reads ``lines_per_page`` consecutive 64-byte lines, so values above
    one model a streaming reader that consumes whole pages.
    """
    if not 1 <= lines_per_page <= PAGE_SIZE // 64:
        raise ValueError("lines_per_page must be in [1, 64]")
    k = np.arange(accesses)
    page = (k // lines_per_page) % pages
    off = (k % lines_per_page) * 64
    return _emit(page, off, base_va, instr)


def chase_cycle(pages: int, rng: np.random.Generator) -> np.ndarray:
    """Successor array of a single random cycle through all pages."""
    order = rng.permutation(pages)
    succ = np.empty(pages, dtype=np.int64)
    succ[order] = np.roll(order, -1)
    return succ


def gen_pointer_chase(pages: int, accesses: int, seed: int, instr: int = 10,
                      base_va: int = DEFAULT_BASE_VA) -> Iterator[TraceEvent]:
    """Dependent loads following one random permutation cycle over the pages."""
    rng = np.random.default_rng(seed)
    succ = chase_cycle(pages, rng)
    seq = np.empty(accesses, dtype=np.int64)
    cur = 0
    for k in range(accesses):
        seq[k] = cur
        cur = succ[cur]
    off = rng.integers(0, PAGE_SIZE // 8, size=pages)[seq] * 8
    return _emit(seq, off, base_va, instr)
