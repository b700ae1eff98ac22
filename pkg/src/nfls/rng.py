"""Deterministic counter-based random streams.

Every stochastic quantity in the toolkit draws from a Philox generator keyed
by ``(seed, stream-id)``. Stream ids are tuples of ints/strings hashed with a
stable digest, so independent substreams (per target, per noise block, per
Monte Carlo trial) can be created in any order, or in parallel, without
correlation and without consuming each other's draws.
"""

import hashlib

import numpy as np


def _part_to_int(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    if isinstance(part, str):
        digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"stream id parts must be int or str, got {type(part)!r}")


def substream(seed: int, *stream_id) -> np.random.Generator:
    """Generator for the substream named by ``stream_id`` under ``seed``."""
    key = tuple(_part_to_int(p) for p in stream_id)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def trial_seed(seed: int, trial: int) -> int:
    """Derived integer seed for one Monte Carlo trial."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(0x74726961, int(trial)))
    return int(ss.generate_state(1, np.uint64)[0])
