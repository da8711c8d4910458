"""Deterministic named substreams.

One master seed drives the whole campaign.  Every consumer of randomness
(each replicate, each field draw, each Monte Carlo node) asks for a stream
by *name*, so results do not depend on execution order or worker schedule.

Structure:

    master seed
      |-- ("replicate", alpha_bits, n, rep_id)
      |         |-- "poisson"
      |         |-- "field"
      |-- ("constants", alpha_bits, "f3", node_index)
      ...

Names are mapped to integers with SHA-256, then fed to numpy's SeedSequence,
which guarantees independent, stable streams.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np


def _encode(part) -> list[int]:
    """Map one path element to SeedSequence entropy words."""
    if isinstance(part, (int, np.integer)):
        return [int(part) & 0xFFFFFFFFFFFFFFFF]
    if isinstance(part, float):
        # IEEE-754 bits, so 0.5 and 0.5000... hash identically
        return [struct.unpack("<Q", struct.pack("<d", part))[0]]
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return list(struct.unpack("<4Q", digest[:32]))
    raise TypeError(f"unsupported stream-name part: {part!r}")


def substream(seed: int, *path) -> np.random.Generator:
    """Return the generator for the named substream of ``seed``.

    The same (seed, path) always yields the same stream; distinct paths
    yield statistically independent streams.
    """
    entropy: list[int] = [int(seed)]
    for part in path:
        entropy.extend(_encode(part))
    return np.random.default_rng(np.random.SeedSequence(entropy))
