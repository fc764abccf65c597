"""Physical frame pool.

Occupancy is a byte-per-frame bitmap.  The free list is implicit: it is
the set of clear bytes, and the lowest free frame is found with
``bytearray.find`` starting from a cached lower bound, so the pool stays
cheap even at 2^20 frames.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, FrameStateError, OutOfMemoryError

PAGE_SIZE = 4096
PAGE_SHIFT = 12


class PhysMem:
    """A pool of ``total_frames`` 4 KiB frames."""

    def __init__(self, total_frames: int) -> None:
        if total_frames < 1:
            raise ConfigError(f"total_frames must be >= 1, got {total_frames}")
        self.total_frames = total_frames
        self._occupied = bytearray(total_frames)
        self._count = 0
        # every frame below this index is occupied
        self._low = 0

    @property
    def occupancy_count(self) -> int:
        return self._count

    @property
    def pressure(self) -> float:
        return self._count / self.total_frames

    @property
    def free_list(self) -> list[int]:
        """Free frames in ascending order (materialised on demand)."""
        return [i for i, b in enumerate(self._occupied) if not b]

    def occupied_frames(self) -> np.ndarray:
        return np.flatnonzero(np.frombuffer(bytes(self._occupied), dtype=np.uint8))

    def bitmap(self) -> bytes:
        return bytes(self._occupied)

    def _check(self, ppn: int) -> None:
        if not 0 <= ppn < self.total_frames:
            raise IndexError(f"ppn {ppn} outside [0, {self.total_frames})")

    def is_free(self, ppn: int) -> bool:
        self._check(ppn)
        return not self._occupied[ppn]

    def claim(self, ppn: int) -> None:
        self._check(ppn)
        if self._occupied[ppn]:
            raise FrameStateError(f"double claim of frame {ppn}")
        self._occupied[ppn] = 1
        self._count += 1

    def release(self, ppn: int) -> None:
        self._check(ppn)
        if not self._occupied[ppn]:
            raise FrameStateError(f"release of free frame {ppn}")
        self._occupied[ppn] = 0
        self._count -= 1
        if ppn < self._low:
            self._low = ppn

    def fallback_alloc(self) -> int:
        """Claim and return the lowest-numbered free frame."""
        ppn = self._occupied.find(0, self._low)
        if ppn < 0:
            raise OutOfMemoryError("no free physical frame")
        self._low = ppn + 1
        self._occupied[ppn] = 1
        self._count += 1
        return ppn

    def inject_pressure(self, fraction: float, rng_seed: int) -> None:
        """Occupy ``round(fraction * P)`` frames chosen uniformly at random.

        Frames already occupied are kept; the injected frames are drawn
        from the currently free ones.
        """
        if not 0.0 <= fraction <= 1.0:
            raise ConfigError(f"pressure fraction must be in [0, 1], got {fraction}")
        target = round(fraction * self.total_frames)
        need = target - self._count
        if need <= 0:
            return
        free = np.flatnonzero(np.frombuffer(bytes(self._occupied), dtype=np.uint8) == 0)
        rng = np.random.default_rng(rng_seed)
        picked = rng.choice(free, size=need, replace=False)
        view = np.frombuffer(self._occupied, dtype=np.uint8)
        view[picked] = 1
        del view
        self._count += need
        self._low = 0
