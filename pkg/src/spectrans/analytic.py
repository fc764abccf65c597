"""Closed-form allocation model and the Monte-Carlo checks against it.

The fresh-occupancy Monte-Carlo draws an independent uniformly random
set of ``round(p * P)`` occupied frames for every trial.  Materialising
a 2^20-frame bitmap per trial is too slow, so :class:`SampledOccupancy`
decides the state of each frame only when it is probed, conditioning on
the frames already decided.  The joint law of the probed frames is then
exactly that of a uniform random M-subset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import OutOfMemoryError
from .hashing import FALLBACK, AnalyticModel, HashPolicy, fallback_probability, tier_probability, tiered_allocate
from .mem import PhysMem
from .pagetable import VPN_BITS


def expected_tier_distribution(p: float, n: int) -> np.ndarray:
    """[P(tier 1), ..., P(tier N), P(fallback)]."""
    model = AnalyticModel(p, n)
    return np.array([tier_probability(model, i) for i in range(1, n + 1)] + [fallback_probability(model)])


class SampledOccupancy:
    """A uniformly random occupancy of ``occupied`` out of ``total`` frames, sampled lazily."""

    def __init__(self, total: int, occupied: int, rng: np.random.Generator) -> None:
        self.total = total
        self.occupied = occupied
        self.rng = rng
        self._state: dict[int, bool] = {}
        self._n_occ = 0

    def _decide(self, ppn: int) -> bool:
        s = self._state.get(ppn)
        if s is None:
            left = self.total - len(self._state)
            s = self.rng.random() * left < self.occupied - self._n_occ
            self._state[ppn] = s
            self._n_occ += s
        return s

    def is_free(self, ppn: int) -> bool:
        return not self._decide(ppn)

    def claim(self, ppn: int) -> None:
        if self._decide(ppn):
            raise ValueError(f"frame {ppn} is occupied")
        self._state[ppn] = True

    def fallback_alloc(self) -> int:
        if self.occupied >= self.total:
            raise OutOfMemoryError("no free physical frame")
        for ppn in range(self.total):
            if not self._decide(ppn):
                self._state[ppn] = True
                return ppn
        raise OutOfMemoryError("no free physical frame")


def _counts_to_freq(counts: np.ndarray) -> np.ndarray:
    return counts / counts.sum()


def monte_carlo_tier_counts(total_frames: int, p: float, n: int, trials: int, seed: int,
                            mode: str = "fresh", master_seed: int = 0x5EED) -> np.ndarray:
    """Counts of [tier 1..N, fallback] over ``trials`` tiered allocations of random VPNs.

    ``mode="fresh"`` redraws the occupancy per trial (independent trials);
    ``mode="sequential"`` injects pressure once and keeps every allocation,
    so occupancy climbs as trials proceed.
    """
    policy = HashPolicy.from_master(n, total_frames, master_seed)
    counts = np.zeros(n + 1, dtype=np.int64)
    occupied = round(p * total_frames)
    if mode == "fresh":
        for t in range(trials):
            rng = np.random.default_rng([seed, t])
            vpn = int(rng.integers(0, 1 << VPN_BITS))
            out = tiered_allocate(policy, SampledOccupancy(total_frames, occupied, rng), vpn)
            counts[out.tier - 1 if out.tier != FALLBACK else n] += 1
    elif mode == "sequential":
        mem = PhysMem(total_frames)
        mem.inject_pressure(p, seed)
        rng = np.random.default_rng([seed, trials])
        vpns = rng.choice(1 << VPN_BITS, size=trials, replace=False)
        for vpn in vpns.tolist():
            out = tiered_allocate(policy, mem, vpn)
            counts[out.tier - 1 if out.tier != FALLBACK else n] += 1
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return counts


def monte_carlo_tier_distribution(total_frames: int, p: float, n: int, trials: int, seed: int,
                                  mode: str = "fresh") -> np.ndarray:
    return _counts_to_freq(monte_carlo_tier_counts(total_frames, p, n, trials, seed, mode))


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float
    passed: bool


def chi_square_fit(empirical: np.ndarray, expected: np.ndarray, trials: int,
                   alpha: float = 0.001) -> ChiSquareResult:
    """Pearson goodness-of-fit of empirical frequencies to expected probabilities.

    Categories with zero expected probability are dropped; any observed
    mass in them fails the test outright.
    """
    emp = np.asarray(empirical, dtype=float)
    exp = np.asarray(expected, dtype=float)
    obs = emp * trials
    keep = exp > 0
    if np.any(obs[~keep] > 0):
        return ChiSquareResult(float("inf"), int(keep.sum()) - 1, 0.0, False)
    e = exp[keep] * trials
    stat = float(((obs[keep] - e) ** 2 / e).sum())
    dof = int(keep.sum()) - 1
    if dof < 1:
        return ChiSquareResult(stat, 0, 1.0, stat == 0.0)
    pval = float(stats.chi2.sf(stat, dof))
    return ChiSquareResult(stat, dof, pval, pval >= alpha)


def binomial_band(q: float, trials: int, sigmas: float = 3.0) -> float:
    return sigmas * float(np.sqrt(q * (1.0 - q) / trials))
