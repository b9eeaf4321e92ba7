"""Counter-based random streams.

Every random draw in the package comes from a generator keyed by
(seed, domain, *counters).  Re-keying instead of advancing a stateful
generator makes mid-run restarts and per-iteration draws reproducible:
the same key always yields the same values, independent of call order.
"""

import numpy as np

# Domain tags keep streams for different purposes disjoint under one seed.
DOMAIN_PLACEMENT = 1
DOMAIN_PA = 2
DOMAIN_INIT = 3
DOMAIN_SHUFFLE = 4
DOMAIN_WEIGHTS = 5
DOMAIN_REPLICATE = 6

_MASK64 = (1 << 64) - 1


def stream(seed: int, domain: int, *counters: int) -> np.random.Generator:
    """Fresh generator for (seed, domain, counters)."""
    key = np.random.SeedSequence(entropy=int(seed) & _MASK64,
                                 spawn_key=(domain, *counters))
    return np.random.default_rng(key)
