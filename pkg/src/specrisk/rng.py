"""Deterministic random-stream derivation.

Every generator in the package draws from a stream keyed by
``(master_seed, *subkeys)``.  Parallel replicates derive their streams from
the master seed and the replicate index alone, so results never depend on
scheduling order or worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_to_int(key: int | str) -> int:
    if isinstance(key, str):
        digest = hashlib.blake2s(key.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    value = int(key)
    if value < 0:
        raise ValueError("seed keys must be non-negative")
    return value


def derive_rng(master_seed: int, *subkeys: int | str) -> np.random.Generator:
    """Return a generator for the stream keyed by (master_seed, \\*subkeys)."""
    entropy = tuple(_key_to_int(k) for k in (master_seed, *subkeys))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(master_seed: int, *subkeys: int | str) -> int:
    """Collapse (master_seed, \\*subkeys) into a single derived integer seed."""
    entropy = tuple(_key_to_int(k) for k in (master_seed, *subkeys))
    digest = hashlib.blake2s(
        b"\x00".join(str(e).encode("ascii") for e in entropy), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")
