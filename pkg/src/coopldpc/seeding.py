"""Counter-based random streams so every trial is reproducible in isolation."""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "chunks"]


def stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the trial addressed by ``key`` under master ``seed``.

    The stream depends only on ``(seed, key)``, never on how many other
    streams were drawn before, so chunks may be evaluated in any order.
    """
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def chunks(n_total: int, chunk_size: int):
    """Yield ``(index, size)`` pairs covering ``n_total`` trials in fixed-size chunks."""
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    for i, start in enumerate(range(0, n_total, chunk_size)):
        yield i, min(chunk_size, n_total - start)
