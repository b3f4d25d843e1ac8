"""Deterministic, named random streams derived from one master seed.

Every stochastic step in the pipeline draws from a stream keyed by a
descriptive path, e.g. ``stream(seed, "train", "shuffle")`` or
``stream(seed, "augment", trial_id, copy)``.  Streams are independent of
each other and of execution order, so results are identical whether work
runs serially or in parallel.  Path strings are hashed with SHA-256 (never
Python's randomized ``hash``) so stream identity is stable across
processes and platforms.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream", "seed_sequence", "child_seed"]


def _encode(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream path ints must be non-negative, got {part}")
        return int(part)
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"stream path parts must be int or str, got {type(part).__name__}")


def seed_sequence(master_seed: int, *path) -> np.random.SeedSequence:
    """SeedSequence for the stream named by ``path`` under ``master_seed``."""
    return np.random.SeedSequence([int(master_seed)] + [_encode(p) for p in path])


def stream(master_seed: int, *path) -> np.random.Generator:
    """Independent Generator for the stream named by ``path``."""
    return np.random.default_rng(seed_sequence(master_seed, *path))


def child_seed(master_seed: int, *path) -> int:
    """Derived integer seed, for components that take a seed rather than a stream."""
    return int(seed_sequence(master_seed, *path).generate_state(1, dtype=np.uint64)[0])
