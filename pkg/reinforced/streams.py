"""Deterministic random streams keyed by (master seed, index path).

A replica's stream depends only on its key, never on scheduling, so ensembles
are reproducible at any worker count.
"""

import numpy as np

# Distinct first spawn-key components keep the stream families apart.
REPLICA = 0
ENVIRONMENT_BLOCK = 1
HITTING = 2
MOMENTS = 3
ENVIRONMENT_SEED = 4


def _sequence(master_seed: int, key) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for the substream ``key`` of ``master_seed``."""
    return np.random.Generator(np.random.PCG64(_sequence(master_seed, key)))


def replica_stream(master_seed: int, replica: int) -> np.random.Generator:
    return stream(master_seed, REPLICA, replica)


def derive_seed(master_seed: int, *key: int) -> int:
    """A 63-bit integer seed for a child object, e.g. one environment per replica."""
    return int(_sequence(master_seed, key).generate_state(1, dtype=np.uint64)[0]) >> 1
