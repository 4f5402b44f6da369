"""Deterministic RNG substreams keyed by integer paths."""

from __future__ import annotations

import zlib

import numpy as np


def label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def derive_rng(seed, *path: int) -> np.random.Generator:
    """Return a generator for ``seed`` refined by an integer ``path``.

    The same (seed, path) always yields the same stream, independent of how
    many other streams were drawn before it.
    """
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(0, 2**63 - 1))
    key = tuple(int(p) & 0xFFFFFFFF for p in path)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))
