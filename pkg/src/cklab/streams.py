"""Deterministic random streams for parallel Monte Carlo.

Every matrix draw owns a private stream derived from
``(master_seed, role, trial)``.  Streams never share state, so trials can run
in any order (or concurrently) and still reproduce bit-identically.  The bit
generator is Philox, a counter-based generator, keyed through a
``SeedSequence`` spawn key so that distinct (role, trial) pairs are
statistically independent.
"""

from __future__ import annotations

import zlib

import numpy as np


def role_code(role: str) -> int:
    """Stable 32-bit code for a stream role name (platform independent)."""
    return zlib.crc32(role.encode("utf-8"))


def stream(master_seed: int, role: str, trial: int = 0) -> np.random.Generator:
    """Generator for the (seed, role, trial) stream.

    Identical arguments always yield an identical stream; distinct arguments
    yield independent streams.
    """
    if trial < 0:
        raise ValueError(f"trial index must be >= 0, got {trial}")
    seq = np.random.SeedSequence(master_seed, spawn_key=(role_code(role), trial))
    return np.random.Generator(np.random.Philox(seq))
