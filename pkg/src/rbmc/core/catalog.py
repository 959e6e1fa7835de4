"""Built-in targets and proposal kernels, addressable by name.

Experiment spec files refer to these names; the factories below are also the
public way to build the standard toy problems in code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Sequence

import numpy as np

from .model import ReferenceMeasure, TargetModel
from .proposals import (
    DiscreteIndependence,
    DiscreteMatrixProposal,
    GaussianRandomWalk,
    IndependentCauchy,
    IndependentExponential,
    IndependentGaussian,
    LangevinProposal,
    MixtureProposal,
    PointMassProposal,
)
from .rng import open_unit

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def normal_target(scale_factor: float = 1.0) -> TargetModel:
    """``scale_factor * phi(x)`` with ``phi`` the standard normal density.

    ``scale_factor = 1`` is N(0, 1); any other value gives an unnormalized
    target with normalization constant ``scale_factor``.
    """
    if not scale_factor > 0:
        raise ValueError("scale_factor must be positive")
    shift = math.log(scale_factor) - _LOG_SQRT_2PI

    def log_density(x):
        return shift - 0.5 * x * x

    def log_gradient(x):
        return -x

    def sampler(rng):
        return float(rng.standard_normal())

    name = "normal" if scale_factor == 1.0 else f"scaled_normal({scale_factor:g})"
    return TargetModel(
        log_density=log_density,
        reference=ReferenceMeasure.continuous(),
        log_gradient=log_gradient,
        exact_normalization=float(scale_factor),
        exact_sampler=sampler,
        name=name,
    )


def exponential_target() -> TargetModel:
    """Exp(1) on ``[0, inf)``."""

    def log_density(x):
        return -x if x >= 0 else -math.inf

    def log_gradient(x):
        return -1.0

    def sampler(rng):
        return -math.log(open_unit(rng))

    return TargetModel(
        log_density=log_density,
        reference=ReferenceMeasure.continuous(),
        log_gradient=log_gradient,
        exact_normalization=1.0,
        exact_sampler=sampler,
        name="exponential",
    )


def discrete_target(weights: Sequence[float]) -> TargetModel:
    """Finite target with unnormalized weights (zeros allowed)."""
    w = [float(v) for v in weights]
    if len(w) < 2 or any(v < 0 for v in w) or not any(v > 0 for v in w):
        raise ValueError("need at least 2 nonnegative weights, not all zero")
    logs = [math.log(v) if v > 0 else -math.inf for v in w]
    total = math.fsum(w)
    cumulative = list(np.cumsum(w) / total)
    last = max(i for i, v in enumerate(w) if v > 0)

    def log_density(x):
        return logs[x]

    def sampler(rng):
        u = rng.random()
        for i, c in enumerate(cumulative):
            if u < c:
                return i
        return last

    return TargetModel(
        log_density=log_density,
        reference=ReferenceMeasure.discrete(len(w)),
        exact_normalization=total,
        exact_sampler=sampler,
        name=f"discrete({','.join(f'{v:g}' for v in w)})",
    )


@dataclass(frozen=True)
class Catalog:
    targets: Dict[str, Callable[..., TargetModel]] = field(default_factory=dict)
    proposals: Dict[str, Callable] = field(default_factory=dict)

    def target(self, name: str, **params) -> TargetModel:
        try:
            factory = self.targets[name]
        except KeyError:
            raise KeyError(f"unknown target {name!r}; known: {sorted(self.targets)}") from None
        return factory(**params)

    def proposal(self, name: str, **params):
        try:
            factory = self.proposals[name]
        except KeyError:
            raise KeyError(
                f"unknown proposal {name!r}; known: {sorted(self.proposals)}"
            ) from None
        return factory(**params)


def builtin_targets_and_proposals() -> Catalog:
    """The named toy targets and kernels used by the experiment specs.

    Proposal factories that depend on the target (``langevin``) take it as the
    ``target`` keyword.
    """
    return Catalog(
        targets={
            "normal": lambda: normal_target(1.0),
            "scaled_normal": lambda scale_factor=2.0: normal_target(scale_factor),
            "exponential": exponential_target,
            "discrete": lambda weights: discrete_target(weights),
        },
        proposals={
            "gaussian_rw": lambda scale: GaussianRandomWalk(scale),
            "gaussian": lambda scale, loc=0.0: IndependentGaussian(loc, scale),
            "cauchy": lambda scale, loc=0.0: IndependentCauchy(loc, scale),
            "exponential": lambda rate: IndependentExponential(rate),
            "matrix": lambda matrix: DiscreteMatrixProposal(matrix),
            "uniform_discrete": lambda state_count: DiscreteMatrixProposal.uniform(state_count),
            "discrete_independence": lambda weights: DiscreteIndependence(weights),
            "point_mass": lambda: PointMassProposal(),
            "langevin": lambda target, step: LangevinProposal(target, step),
            "mixture": lambda local, transfer, delta: MixtureProposal(local, transfer, delta),
        },
    )
