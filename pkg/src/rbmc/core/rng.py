"""Deterministic random streams.

Every sampler takes an explicit :class:`numpy.random.Generator`. Streams are
derived from a ``(master_seed, stream_index)`` pair through
:class:`numpy.random.SeedSequence`, so a given pair always reproduces the same
draws no matter how work is scheduled across processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_U64 = 2**64


@dataclass(frozen=True)
class RngStreamSpec:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_index"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if not 0 <= int(value) < _U64:
                raise ValueError(f"{name} must fit in 64 unsigned bits, got {value}")

    def generator(self, *substream: int) -> np.random.Generator:
        """Return a fresh generator for this stream.

        Extra integers select independent sub-streams (for example the
        dedicated regeneration stream of a restore run).
        """
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed),
            spawn_key=(int(self.stream_index),) + tuple(int(s) for s in substream),
        )
        return np.random.Generator(np.random.PCG64(seq))


def open_unit(rng: np.random.Generator) -> float:
    """Uniform draw on (0, 1]; safe to feed to ``log``."""
    return 1.0 - rng.random()


def exponential(rng: np.random.Generator, rate: float) -> float:
    """Exp(rate) by inversion. ``rate = inf`` gives 0, ``rate = 0`` gives inf."""
    if rate == math.inf:
        return 0.0
    if rate <= 0.0:
        return math.inf
    return -math.log(open_unit(rng)) / rate
