"""Seeded random streams.

A run seed is expanded into per-chain streams with ``numpy.random.SeedSequence``
spawning; each stream drives a counter-based Philox generator.  Chain ``i``
always receives spawn key ``(i,)``, so its draws do not depend on how many
chains are run alongside it.
"""

import numpy as np


def make_rng(seed) -> np.random.Generator:
    """Generator for a single stream; accepts an int, a SeedSequence or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def chain_seed_sequences(seed, n_chains):
    return [np.random.SeedSequence(seed, spawn_key=(i,)) for i in range(n_chains)]


def chain_rngs(seed, n_chains):
    return [make_rng(ss) for ss in chain_seed_sequences(seed, n_chains)]


def describe_stream(ss: np.random.SeedSequence) -> dict:
    """Manifest entry for a stream: entropy, spawn key and a derived 64-bit key."""
    return {
        "entropy": int(ss.entropy),
        "spawn_key": list(ss.spawn_key),
        "derived_seed": int(ss.generate_state(1, np.uint64)[0]),
        "bit_generator": "Philox",
    }
