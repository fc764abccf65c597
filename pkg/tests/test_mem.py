import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectrans.errors import ConfigError, FrameStateError, OutOfMemoryError
from spectrans.mem import PhysMem


def test_new_pool_is_empty():
    mem = PhysMem(8)
    assert mem.occupancy_count == 0
    assert mem.free_list == list(range(8))
    assert PhysMem(1).free_list == [0]


def test_zero_frames_rejected():
    with pytest.raises(ConfigError):
        PhysMem(0)


@pytest.mark.parametrize("fraction,expected", [(0.0, 0), (1.0, 10), (0.5, 5), (0.25, 2)])
def test_inject_pressure_counts(fraction, expected):
    mem = PhysMem(10)
    mem.inject_pressure(fraction, rng_seed=3)
    assert mem.occupancy_count == expected


def test_inject_pressure_reproducible():
    a = PhysMem(100_000)
    b = PhysMem(100_000)
    a.inject_pressure(0.4, rng_seed=7)
    b.inject_pressure(0.4, rng_seed=7)
    assert a.occupancy_count == 40_000
    assert a.bitmap() == b.bitmap()
    c = PhysMem(100_000)
    c.inject_pressure(0.4, rng_seed=8)
    assert c.bitmap() != a.bitmap()


def test_inject_pressure_rejects_bad_fraction():
    with pytest.raises(ConfigError):
        PhysMem(10).inject_pressure(1.5, 0)
    with pytest.raises(ConfigError):
        PhysMem(10).inject_pressure(-0.1, 0)


def test_inject_pressure_is_roughly_uniform():
    mem = PhysMem(1 << 16)
    mem.inject_pressure(0.5, rng_seed=1)
    occ = mem.occupied_frames()
    # each quarter of the pool holds about a quarter of the occupied frames
    quarters = np.bincount(occ >> 14, minlength=4)
    assert np.all(np.abs(quarters - len(occ) / 4) < 0.02 * len(occ))


def test_is_free_and_claim():
    mem = PhysMem(8)
    assert mem.is_free(3)
    mem.claim(3)
    assert not mem.is_free(3)
    full = PhysMem(8)
    full.inject_pressure(1.0, 0)
    assert not any(full.is_free(i) for i in range(8))
    with pytest.raises(IndexError):
        mem.is_free(8)


def test_double_claim_and_bad_release():
    mem = PhysMem(4)
    mem.claim(0)
    assert mem.occupancy_count == 1
    with pytest.raises(FrameStateError):
        mem.claim(0)
    mem.release(0)
    mem.claim(0)
    with pytest.raises(FrameStateError):
        mem.release(1)


def test_release_round_trip():
    mem = PhysMem(8)
    mem.claim(5)
    mem.release(5)
    assert mem.is_free(5)
    assert mem.occupancy_count == 0


def test_fallback_alloc_lowest_free():
    mem = PhysMem(4)
    assert mem.fallback_alloc() == 0
    mem2 = PhysMem(4)
    mem2.claim(0)
    mem2.claim(1)
    assert mem2.fallback_alloc() == 2
    full = PhysMem(2)
    full.inject_pressure(1.0, 0)
    with pytest.raises(OutOfMemoryError):
        full.fallback_alloc()


def test_fallback_after_release_reuses_low_frame():
    mem = PhysMem(8)
    for _ in range(5):
        mem.fallback_alloc()
    mem.release(1)
    assert mem.fallback_alloc() == 1
    assert mem.fallback_alloc() == 5


def test_fallback_strictly_increasing_until_exhaustion():
    mem = PhysMem(64)
    mem.inject_pressure(0.5, rng_seed=2)
    got = []
    while True:
        try:
            got.append(mem.fallback_alloc())
        except OutOfMemoryError:
            break
    assert got == sorted(set(got))
    assert len(got) == 32


ops = st.lists(st.tuples(st.sampled_from(["claim", "release", "fallback"]), st.integers(0, 31)), max_size=200)


@settings(max_examples=200, deadline=None)
@given(ops)
def test_partition_invariant(seq):
    mem = PhysMem(32)
    model: set[int] = set()
    for op, ppn in seq:
        if op == "claim":
            if ppn in model:
                with pytest.raises(FrameStateError):
                    mem.claim(ppn)
            else:
                mem.claim(ppn)
                model.add(ppn)
        elif op == "release":
            if ppn in model:
                mem.release(ppn)
                model.remove(ppn)
            else:
                with pytest.raises(FrameStateError):
                    mem.release(ppn)
        else:
            if len(model) == 32:
                with pytest.raises(OutOfMemoryError):
                    mem.fallback_alloc()
            else:
                got = mem.fallback_alloc()
                assert got == min(set(range(32)) - model)
                model.add(got)
        assert mem.occupancy_count == len(model)
        assert set(mem.free_list) == set(range(32)) - model
