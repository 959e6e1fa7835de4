"""Targets and the reference measures their densities are written against."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np


class ReferenceKind(enum.Enum):
    CONTINUOUS_1D = "continuous_1d"
    DISCRETE_FINITE = "discrete_finite"


@dataclass(frozen=True)
class ReferenceMeasure:
    """Lebesgue measure on the real line or counting measure on ``{0..K-1}``."""

    kind: ReferenceKind
    state_count: Optional[int] = None

    def __post_init__(self):
        if self.kind is ReferenceKind.DISCRETE_FINITE:
            if self.state_count is None or int(self.state_count) < 2:
                raise ValueError("a finite discrete reference needs at least 2 states")
        elif self.state_count is not None:
            raise ValueError("a continuous reference has no state count")

    @classmethod
    def continuous(cls) -> "ReferenceMeasure":
        return cls(ReferenceKind.CONTINUOUS_1D)

    @classmethod
    def discrete(cls, state_count: int) -> "ReferenceMeasure":
        return cls(ReferenceKind.DISCRETE_FINITE, int(state_count))

    @property
    def is_discrete(self) -> bool:
        return self.kind is ReferenceKind.DISCRETE_FINITE

    def states(self) -> range:
        if not self.is_discrete:
            raise ValueError("a continuous reference has no enumerable states")
        return range(self.state_count)


@dataclass(frozen=True)
class TargetModel:
    """Unnormalized target density ``pi`` with respect to ``reference``.

    ``log_density`` may return ``-inf`` (``pi = 0``) but never ``+inf`` or NaN.
    ``exact_normalization`` and ``exact_sampler`` are validation aids only; the
    samplers never need them except to draw initial states.
    """

    log_density: Callable[[Any], float]
    reference: ReferenceMeasure
    log_gradient: Optional[Callable[[float], float]] = None
    exact_normalization: Optional[float] = None
    exact_sampler: Optional[Callable[[np.random.Generator], Any]] = None
    name: str = "target"

    def __post_init__(self):
        if self.log_gradient is not None and self.reference.is_discrete:
            raise ValueError("log_gradient only makes sense on a continuous reference")
        if self.exact_normalization is not None and not self.exact_normalization > 0:
            raise ValueError("exact_normalization must be positive")

    def log_pi(self, x) -> float:
        """``log_density`` with the no-``+inf``/no-NaN contract enforced."""
        value = self.log_density(x)
        if value != value or value == math.inf:
            raise ValueError(f"log density of {self.name} at {x!r} is {value}")
        return value

    def density(self, x) -> float:
        return math.exp(self.log_pi(x))
