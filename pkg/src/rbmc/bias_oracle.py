"""Completed (unbiased) tour weights and a Monte Carlo check of the vanilla bias.

A vanilla tour weight ``L_hat`` stops at the tour's acceptance and so
underestimates ``1 / a(Z)`` on average. Appending an independent tail of
rejection products, scaled by the product over the tour's rejected
proposals, removes that bias; the expected size of the correction has the
closed form ``(1 - a) / (1 - r2)``. This module simulates tours pinned at a
given state and compares both facts with exact finite-space oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, List, Optional

import numpy as np

from .core.acceptance import (
    acceptance_probability,
    expected_acceptance_exact,
    rejection_second_moment_exact,
)
from .core.model import TargetModel
from .core.proposals import ProposalKernel
from .core.rng import RngStreamSpec
from .errors import DegenerateConfigurationError
from .mh import TourRecord

TAIL_THRESHOLD = 1e-15
DEFAULT_TAIL_CAP = 10**6
DEFAULT_TOUR_CAP = 10**7

TOUR_SUBSTREAM = 0
TAIL_SUBSTREAM = 1


def completion_tail(z, target: TargetModel, proposal: ProposalKernel, rng: np.random.Generator,
                    cap: int = DEFAULT_TAIL_CAP, threshold: float = TAIL_THRESHOLD) -> float:
    """``sum_{t >= 1} prod_{s <= t} (1 - alpha(z, Y_s))`` with fresh ``Y_s ~ Q(z, .)``.

    Summation stops once the running product drops below ``threshold``.

    Raises:
        DegenerateConfigurationError: if ``cap`` terms are summed and the
            product is still above ``threshold``.
    """
    if cap < 1:
        raise ValueError("cap must be positive")
    product = 1.0
    terms = []
    for _ in range(cap):
        y = proposal.sample(z, rng)
        product *= 1.0 - acceptance_probability(target, proposal, z, y)
        if product < threshold:
            terms.append(product)
            return math.fsum(terms)
        terms.append(product)
    raise DegenerateConfigurationError(
        f"completion tail at {z!r} still at product {product:.3g} after {cap} terms"
    )


def completed_weight(tour: TourRecord, tail: float, trailing_product: float) -> float:
    """``L_hat + trailing_product * tail``.

    ``trailing_product`` is the product of ``1 - alpha`` over the tour's
    rejected proposals only (the accepted proposal is excluded), so a tour of
    length one passes the empty product 1.
    """
    return tour.vanilla_weight + trailing_product * tail


@dataclass(frozen=True)
class ConditionedTour:
    """One tour started at a pinned state, run until its first acceptance."""

    record: TourRecord
    trailing_product: float


def simulate_conditioned_tour(z, target: TargetModel, proposal: ProposalKernel,
                              rng: np.random.Generator,
                              max_length: int = DEFAULT_TOUR_CAP) -> ConditionedTour:
    """Propose from ``z`` until the first acceptance, tracking the vanilla weight.

    Draws ``y`` then the uniform ``u`` at every step, like the MH loop.
    """
    weight = product = 1.0
    for length in range(1, max_length + 1):
        y = proposal.sample(z, rng)
        alpha = acceptance_probability(target, proposal, z, y)
        before = product
        product *= 1.0 - alpha
        weight += product
        if rng.random() < alpha:
            return ConditionedTour(TourRecord(z, length, weight, 0), before)
    raise DegenerateConfigurationError(f"no acceptance within {max_length} proposals from {z!r}")


def predicted_bias(a: float, r2: float) -> float:
    """Expected gap ``E[L_bar - L_hat | Z]`` given ``a(Z)`` and ``r2(Z)``."""
    if not r2 < 1.0:
        raise DegenerateConfigurationError("rejection second moment must be below 1")
    return (1.0 - a) / (1.0 - r2)


@dataclass(frozen=True)
class BiasReport:
    state: Any
    expected_acceptance: float
    rejection_second_moment: float
    predicted_bias: float
    empirical_bias: float
    standard_error: float
    tour_count: int
    # extra diagnostics for the unbiasedness check of the completed weight
    completed_mean: float = math.nan
    completed_standard_error: float = math.nan
    mean_waiting: float = math.nan

    @property
    def z_score(self) -> float:
        if self.standard_error == 0.0:
            return 0.0 if self.empirical_bias == self.predicted_bias else math.inf
        return (self.empirical_bias - self.predicted_bias) / self.standard_error

    @property
    def completed_z_score(self) -> float:
        target = 1.0 / self.expected_acceptance
        if self.completed_standard_error == 0.0:
            return 0.0 if math.isclose(self.completed_mean, target, rel_tol=1e-12) else math.inf
        return (self.completed_mean - target) / self.completed_standard_error


def _mean_and_se(values: np.ndarray):
    mean = float(np.mean(values))
    if len(values) < 2:
        return mean, math.nan
    return mean, float(np.std(values, ddof=1) / math.sqrt(len(values)))


@dataclass
class ConditionedSample:
    """Arrays gathered from ``tours`` tours pinned at one state."""

    state: Any
    waiting: np.ndarray
    vanilla: np.ndarray
    completed: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        return self.completed - self.vanilla


def sample_conditioned(z, target: TargetModel, proposal: ProposalKernel, tours: int,
                       rng_spec: RngStreamSpec, tail_cap: int = DEFAULT_TAIL_CAP) -> ConditionedSample:
    """Simulate ``tours`` tours from ``z`` with their completed weights.

    Tours and tails use separate sub-streams keyed by ``z``, so tails are
    independent of the tours they complete.
    """
    key = int(z)
    tour_rng = rng_spec.generator(key, TOUR_SUBSTREAM)
    tail_rng = rng_spec.generator(key, TAIL_SUBSTREAM)
    waiting = np.empty(tours, dtype=np.int64)
    vanilla = np.empty(tours)
    completed = np.empty(tours)
    for k in range(tours):
        tour = simulate_conditioned_tour(z, target, proposal, tour_rng)
        tail = completion_tail(z, target, proposal, tail_rng, cap=tail_cap)
        waiting[k] = tour.record.observed_waiting
        vanilla[k] = tour.record.vanilla_weight
        completed[k] = completed_weight(tour.record, tail, tour.trailing_product)
    return ConditionedSample(z, waiting, vanilla, completed)


def verify_bias_theorem(target: TargetModel, proposal: ProposalKernel, tours: int,
                        rng_spec: RngStreamSpec, states: Optional[List[int]] = None) -> List[BiasReport]:
    """Compare the empirical mean of ``L_bar - L_hat`` with its closed form, per state.

    Args:
        target: target on a finite discrete space.
        proposal: proposal kernel on the same space.
        tours: number of tours simulated per state.
        rng_spec: stream for the whole check; each state gets its own sub-streams.
        states: states to check; defaults to every state with positive mass.
    """
    if tours < 1:
        raise ValueError("tours must be positive")
    if not target.reference.is_discrete:
        raise ValueError("the bias check needs a finite discrete target")
    if states is None:
        states = [z for z in target.reference.states() if target.log_pi(z) > -math.inf]
    reports = []
    for z in states:
        a = expected_acceptance_exact(target, proposal, z)
        r2 = rejection_second_moment_exact(target, proposal, z)
        sample = sample_conditioned(z, target, proposal, tours, rng_spec)
        gap_mean, gap_se = _mean_and_se(sample.gap)
        lbar_mean, lbar_se = _mean_and_se(sample.completed)
        reports.append(BiasReport(
            state=z,
            expected_acceptance=a,
            rejection_second_moment=r2,
            predicted_bias=predicted_bias(a, r2),
            empirical_bias=gap_mean,
            standard_error=gap_se,
            tour_count=tours,
            completed_mean=lbar_mean,
            completed_standard_error=lbar_se,
            mean_waiting=float(np.mean(sample.waiting)),
        ))
    return reports
