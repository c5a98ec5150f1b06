"""Seeded substreams.

Every random draw in the package comes from a Philox (counter-based)
generator keyed by a tuple of nonnegative integers, so results depend only
on (seed, stream keys) and never on scheduling or thread count.
"""

from __future__ import annotations

import numpy as np

SEED_BITS = 64


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 1 << SEED_BITS:
        raise ValueError(f"seed must be an unsigned {SEED_BITS}-bit integer, got {seed}")
    return seed


def substream(seed: int, *keys: int) -> np.random.Generator:
    entropy = [check_seed(seed), *(int(k) for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for an independent sub-experiment."""
    return int(substream(seed, *keys).integers(0, 1 << 63))
