"""
Test offer_to_memory function
from tracker.py file
"""
import numpy as np
import pytest

from fusetrack.geometry import BBox
from fusetrack.tracker import MemoryBank, MemoryEntry, offer_to_memory

BOX = BBox(0, 0, 1, 1)


def entry(frame_index, score):
    """Memory entry with only the composite score set"""
    return MemoryEntry(frame_index, BOX, 0.0, 0.0, 0.0, score)


def test_fills_up_to_capacity():
    """Entries are kept until the bank is full"""
    bank = MemoryBank(3)
    for i, score in enumerate([0.2, 0.9, 0.5]):
        bank = offer_to_memory(bank, entry(i, score))
    assert [e.frame_index for e in bank.entries] == [0, 1, 2]


def test_evicts_lowest_score():
    """A stronger entry replaces the weakest one"""
    bank = MemoryBank(2, (entry(0, 0.2), entry(1, 0.9)))
    bank = offer_to_memory(bank, entry(2, 0.5))
    assert [e.frame_index for e in bank.entries] == [1, 2]


def test_weaker_entry_leaves_bank_unchanged():
    """Offering an entry that would be evicted returns the same bank"""
    bank = MemoryBank(2, (entry(0, 0.6), entry(1, 0.9)))
    assert offer_to_memory(bank, entry(2, 0.1)) is bank


def test_ties_evict_older_entry():
    """On equal scores the newer frame is kept"""
    bank = MemoryBank(2, (entry(0, 0.5), entry(1, 0.5)))
    bank = offer_to_memory(bank, entry(2, 0.5))
    assert [e.frame_index for e in bank.entries] == [1, 2]


def test_invalid_capacity():
    """Capacity must be positive"""
    with pytest.raises(ValueError, match="capacity"):
        offer_to_memory(MemoryBank(0), entry(0, 0.5))


def test_matches_brute_force_top_k():
    """1,000 random offer sequences agree with a global top-k selection"""
    rng = np.random.default_rng(123)
    for _ in range(1000):
        capacity = int(rng.integers(1, 11))
        length = int(rng.integers(1, 201))
        # coarse scores so that ties happen
        scores = np.round(rng.uniform(0.0, 1.0, length), 1)
        offered = [entry(i, float(s)) for i, s in enumerate(scores)]
        bank = MemoryBank(capacity)
        for item in offered:
            bank = offer_to_memory(bank, item)
            assert len(bank.entries) <= capacity
        expected = sorted(sorted(offered, key=MemoryEntry.rank_key)[-capacity:],
                          key=lambda e: e.frame_index)
        assert list(bank.entries) == expected
