"""Deterministic stream derivation for seeded, parallel-safe experiments.

Every random draw in the package goes through a stream derived from
``(root_seed, path)`` where ``path`` is a tuple of small ints and/or short
string labels.  Streams with distinct paths are statistically independent
(numpy ``SeedSequence`` spawn keys), and the same ``(root_seed, path)``
always reproduces the same bit stream, regardless of the order in which
parallel tasks run.
"""

from __future__ import annotations

import numpy as np


def _as_key(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream path ints must be non-negative, got {part}")
        return int(part)
    if isinstance(part, str):
        # FNV-1a, 32-bit: stable across platforms and python versions
        h = 2166136261
        for byte in part.encode("utf-8"):
            h = ((h ^ byte) * 16777619) & 0xFFFFFFFF
        return h
    raise TypeError(f"stream path element must be int or str, got {type(part)!r}")


def seed_sequence(root_seed: int, *path) -> np.random.SeedSequence:
    """SeedSequence for the substream named by ``path`` under ``root_seed``."""
    return np.random.SeedSequence(
        entropy=int(root_seed), spawn_key=tuple(_as_key(p) for p in path)
    )


def derive_rng(root_seed: int, *path) -> np.random.Generator:
    """Fresh Generator on the substream named by ``path``."""
    return np.random.default_rng(seed_sequence(root_seed, *path))
