"""Deterministic random streams.

Streams are counter-based (Philox) and keyed by (seed, stream index), so each
trajectory owns an independent substream and changing the trajectory count
never reshuffles earlier streams. High index blocks are reserved for run-level
setup draws (ground truth, initial points).
"""
from __future__ import annotations

import numpy as np

TRUTH_STREAM = 1 << 48
INIT_STREAM = 1 << 49


def substream(seed: int, index: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, index & 0xFFFFFFFFFFFFFFFF],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
