"""Deterministic RNG streams derived from a master seed and an index path.

Every Monte Carlo unit of work (a round, an episode, a warmup draw) gets its
own generator keyed by (master seed, path of indices), so results do not
depend on scheduling order or worker count.
"""

from __future__ import annotations

import numpy as np

_UINT32 = 2**32


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """Independent generator for the work unit addressed by ``path``."""
    key = tuple(int(p) % _UINT32 for p in path)
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=key))


def rng_from(seed) -> np.random.Generator:
    """Coerce an int, SeedSequence, or Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
