"""Deterministic counter-based random streams.

Replicate ``i`` of a study keyed by ``master_seed`` draws from
``stream(master_seed, i)``; the Philox generator is counter-based, so
results are independent of evaluation order and worker count.
"""

from __future__ import annotations

import numpy as np


def stream(master_seed: int, *path: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(master_seed: int, *path: int) -> int:
    """Stable 63-bit sub-seed for a keyed branch of a study."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> 1)
