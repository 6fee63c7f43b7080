"""Reproducible random substreams.

Every stream is keyed by ``(seed, stream)`` and an optional tuple of
component keys; the bits come from numpy's counter-based Philox generator
seeded through :class:`numpy.random.SeedSequence`, so the draw sequence
does not depend on platform or on the order in which streams are created.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# component keys used inside one replication
SERVICE = 0
ARRIVALS = 1
RACE = 2


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= self.seed < 2**64 and 0 <= self.stream < 2**64):
            raise ValueError("seed and stream must be 64-bit unsigned integers")

    def generator(self, *components: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *components))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, stream: int) -> "RngStream":
        return RngStream(self.seed, stream)


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngStream, or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot make a generator from {type(rng).__name__}")
