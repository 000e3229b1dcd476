"""Named, counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, *names)``.  Names may be
strings or non-negative integers, so ``stream(seed, "perturbed", n)`` and
``stream(seed, "unperturbed", n)`` never share state, and the same key always
reproduces the same draws.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(name) -> int:
    if isinstance(name, (int, np.integer)):
        if name < 0:
            raise ValueError("integer stream keys must be non-negative")
        return int(name)
    return zlib.crc32(str(name).encode("utf-8"))


def stream(seed: int, *names) -> np.random.Generator:
    """Return a fresh generator for the named sub-stream of ``seed``."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(n) for n in names))
    return np.random.Generator(np.random.Philox(seq))
