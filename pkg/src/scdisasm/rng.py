"""Deterministic random streams.

Every stochastic stage draws from a counter-based Philox generator keyed
by the run seed plus a short label path, so independent stages get
independent streams and identical configurations reproduce identical
bytes in every report.
"""
from __future__ import annotations

import zlib

import numpy as np


def child_rng(*keys: int | str) -> np.random.Generator:
    """Return a Philox generator keyed by a mixed int/str label path."""
    ints = []
    for k in keys:
        if isinstance(k, (int, np.integer)):
            ints.append(int(k) & 0xFFFFFFFF)
        else:
            ints.append(zlib.crc32(str(k).encode("utf-8")))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(ints)))
