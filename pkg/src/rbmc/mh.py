"""Metropolis-Hastings with standard, waste-recycling and vanilla estimators.

:func:`run_mh_estimator` follows the generic Rao-Blackwellized MH loop
step for step, one estimator mode per run. :func:`simulate_mh_trace` records a
single chain so that all three estimators (at any budget) can be read off the
same draws; the experiment harness uses it and the test suite checks it
against the per-mode loop.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Sequence

import numpy as np

from .core.acceptance import acceptance_probability
from .core.model import TargetModel
from .core.proposals import ProposalKernel
from .core.rng import RngStreamSpec
from .errors import DegenerateConfigurationError

DEFAULT_MAX_TOUR_LENGTH = 10**7
DEFAULT_FIXED_POINT_BURN_IN = 10_000


class EstimatorMode(enum.Enum):
    STANDARD = "standard"
    WASTE_RECYCLING = "waste_recycling"
    VANILLA = "vanilla"


ALL_MODES = (EstimatorMode.STANDARD, EstimatorMode.WASTE_RECYCLING, EstimatorMode.VANILLA)


@dataclass(frozen=True)
class TourRecord:
    """One accepted state and how long the chain sat there.

    ``observed_waiting`` counts the proposals made from ``accepted_state``
    (the accepted one included); ``vanilla_weight`` is the running-product
    estimate of the inverse expected acceptance built from those proposals.
    A trailing tour that never saw its acceptance has ``complete=False``.
    """

    accepted_state: Any
    observed_waiting: int
    vanilla_weight: float
    acceptance_time: int
    complete: bool = True


class EstimatorAccumulator:
    """Ratio-of-sums accumulator for several integrands sharing one weight.

    Terms are kept and summed with :func:`math.fsum`, so the result is
    correctly rounded and does not depend on accumulation order.
    """

    def __init__(self, n_integrands: int):
        self._weights: List[float] = []
        self._sums: List[List[float]] = [[] for _ in range(n_integrands)]

    def add(self, weight: float, weighted_values: Sequence[float]):
        self._weights.append(weight)
        for terms, v in zip(self._sums, weighted_values):
            terms.append(v)

    @property
    def total_weight(self) -> float:
        return math.fsum(self._weights)

    @property
    def weighted_sums(self) -> List[float]:
        return [math.fsum(t) for t in self._sums]

    def estimates(self) -> List[float]:
        total = self.total_weight
        if not total > 0:
            raise DegenerateConfigurationError("total weight is not positive at finalization")
        return [s / total for s in self.weighted_sums]


@dataclass(frozen=True)
class FromExactSampler:
    burn_in: int = 0


@dataclass(frozen=True)
class FixedPoint:
    state: Any
    burn_in: int = DEFAULT_FIXED_POINT_BURN_IN


@dataclass(frozen=True)
class MhRunConfig:
    target: TargetModel
    proposal: ProposalKernel
    sample_budget: int
    mode: EstimatorMode
    rng: RngStreamSpec
    initial_state: Any = field(default_factory=FromExactSampler)
    max_tour_length: int = DEFAULT_MAX_TOUR_LENGTH

    def __post_init__(self):
        if int(self.sample_budget) < 1:
            raise ValueError("sample_budget must be at least 1")
        if self.mode is EstimatorMode.WASTE_RECYCLING and self.sample_budget < 2:
            # the waste-recycling sum over proposals is empty at n = 1
            raise ValueError("waste-recycling needs sample_budget >= 2")
        if self.initial_state.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.max_tour_length < 1:
            raise ValueError("max_tour_length must be positive")


@dataclass(frozen=True)
class MhStep:
    current: Any
    proposal: Any
    alpha: float
    accepted: bool

    @property
    def next(self):
        return self.proposal if self.accepted else self.current


@dataclass
class MhResult:
    estimates: List[float]
    mode: EstimatorMode
    proposals: int
    acceptances: int
    total_weight: float
    tours: Optional[List[TourRecord]] = None


def mh_step(x, target: TargetModel, proposal: ProposalKernel, rng: np.random.Generator) -> MhStep:
    """Propose ``y ~ Q(x, .)``, then accept iff ``u < alpha(x, y)`` with ``u ~ U[0, 1)``."""
    y = proposal.sample(x, rng)
    alpha = acceptance_probability(target, proposal, x, y)
    return MhStep(x, y, alpha, rng.random() < alpha)


def initial_state(policy, target: TargetModel, proposal: ProposalKernel, rng) -> Any:
    """Draw or fix the starting state, then run and discard ``policy.burn_in`` steps."""
    if isinstance(policy, FromExactSampler):
        if target.exact_sampler is None:
            raise ValueError(f"target {target.name!r} has no exact sampler")
        x = target.exact_sampler(rng)
    elif isinstance(policy, FixedPoint):
        x = policy.state
    else:
        raise TypeError(f"unknown initial state policy {policy!r}")
    for _ in range(policy.burn_in):
        x = mh_step(x, target, proposal, rng).next
    return x


def run_mh_estimator(
    config: MhRunConfig,
    integrands: Sequence[Callable[[Any], float]],
    record_tours: bool = False,
) -> MhResult:
    """Estimate ``int f d(mu)`` for each integrand with the configured mode.

    Standard and waste-recycling stop after ``sample_budget`` loop iterations
    (``sample_budget - 1`` proposals). Vanilla only stops at an acceptance
    once the budget is reached, so it can use a few more proposals; the
    trailing incomplete tour never enters its estimate.
    """
    if not integrands:
        raise ValueError("need at least one integrand")
    target, proposal, mode = config.target, config.proposal, config.mode
    n = config.sample_budget
    rng = config.rng.generator()
    x = initial_state(config.initial_state, target, proposal, rng)

    standard = mode is EstimatorMode.STANDARD
    waste = mode is EstimatorMode.WASTE_RECYCLING
    vanilla = mode is EstimatorMode.VANILLA
    acc = EstimatorAccumulator(len(integrands))
    tours: List[TourRecord] = []
    weight = product = 1.0
    proposals = acceptances = tour_length = 0
    tour_start = 0

    i = 1
    while True:
        if standard:
            acc.add(1.0, [f(x) for f in integrands])
        if not vanilla and i >= n:
            break
        y = proposal.sample(x, rng)
        alpha = acceptance_probability(target, proposal, x, y)
        proposals += 1
        tour_length += 1
        if vanilla or record_tours:
            product *= 1.0 - alpha
            weight += product
        if waste:
            acc.add(1.0, [(1.0 - alpha) * f(x) + alpha * f(y) for f in integrands])
        if rng.random() < alpha:
            acceptances += 1
            if record_tours:
                tours.append(TourRecord(x, tour_length, weight, tour_start))
            if vanilla:
                acc.add(weight, [weight * f(x) for f in integrands])
            weight = product = 1.0
            tour_start = i
            tour_length = 0
            x = y
            if vanilla and i + 1 >= n:
                break
        elif tour_length >= config.max_tour_length:
            raise DegenerateConfigurationError(
                f"no acceptance within {config.max_tour_length} proposals from state {x!r}"
            )
        i += 1

    if record_tours and tour_length > 0:
        tours.append(TourRecord(x, tour_length, weight, tour_start, complete=False))
    return MhResult(
        estimates=acc.estimates(),
        mode=mode,
        proposals=proposals,
        acceptances=acceptances,
        total_weight=acc.total_weight,
        tours=tours if record_tours else None,
    )


def decompose_tours(trace: Sequence[MhStep]) -> List[TourRecord]:
    """Split a chain into tours of rejections closed by one acceptance.

    The first pre-move state counts as accepted at time 0. Repeating each
    tour's state ``observed_waiting`` times reproduces the pre-move states of
    ``trace``. A trailing run without acceptance comes back with
    ``complete=False``.
    """
    tours: List[TourRecord] = []
    if not trace:
        return tours
    start, state = 0, trace[0].current
    weight = product = 1.0
    for t, step in enumerate(trace, start=1):
        if step.current != state:
            raise ValueError(f"trace is not a chain: step {t} starts at {step.current!r}")
        product *= 1.0 - step.alpha
        weight += product
        if step.accepted:
            tours.append(TourRecord(state, t - start, weight, start))
            start, state = t, step.proposal
            weight = product = 1.0
    if start < len(trace):
        tours.append(TourRecord(state, len(trace) - start, weight, start, complete=False))
    return tours


def vanilla_weight_from_tour(z, proposals: Sequence[Any], target: TargetModel,
                             proposal: ProposalKernel) -> float:
    """``1 + sum_t prod_{s <= t} (1 - alpha(z, y_s))`` over the tour's proposals."""
    weight = product = 1.0
    for y in proposals:
        product *= 1.0 - acceptance_probability(target, proposal, z, y)
        weight += product
    return weight


def _batch(f, xs: np.ndarray) -> np.ndarray:
    batch = getattr(f, "batch", None)
    if batch is not None:
        return np.asarray(batch(xs), dtype=float)
    return np.fromiter((f(x) for x in xs), dtype=float, count=len(xs))


@dataclass
class MhTrace:
    """A recorded chain plus its vanilla tours.

    ``states[i]`` is the chain after ``i`` steps; step ``i`` (1-based) proposed
    ``proposals[i - 1]`` from ``states[i - 1]`` with acceptance ``alphas[i - 1]``.
    Tour ``m`` sat at ``tour_states[m]`` and ended with an acceptance at step
    ``tour_ends[m]``.
    """

    states: np.ndarray
    proposals: np.ndarray
    alphas: np.ndarray
    accepted: np.ndarray
    tour_states: np.ndarray
    tour_weights: np.ndarray
    tour_ends: np.ndarray
    seconds: float = 0.0

    @property
    def steps(self) -> int:
        return len(self.alphas)

    def _vanilla_tour_count(self, n: int) -> int:
        # tours up to the first acceptance at loop index i with i + 1 >= n
        m = int(np.searchsorted(self.tour_ends, max(n - 1, 1), side="left"))
        if m >= len(self.tour_ends):
            raise ValueError(f"trace too short for vanilla budget {n}")
        return m + 1

    def standard(self, f, n: int) -> float:
        if n > len(self.states):
            raise ValueError(f"trace too short for budget {n}")
        return math.fsum(_batch(f, self.states[:n])) / n

    def waste_recycling(self, f, n: int) -> float:
        if n < 2 or n - 1 > self.steps:
            raise ValueError(f"invalid waste-recycling budget {n}")
        a = self.alphas[: n - 1]
        terms = (1.0 - a) * _batch(f, self.states[: n - 1]) + a * _batch(f, self.proposals[: n - 1])
        return math.fsum(terms) / (n - 1)

    def vanilla(self, f, n: int) -> float:
        m = self._vanilla_tour_count(n)
        w = self.tour_weights[:m]
        return math.fsum(w * _batch(f, self.tour_states[:m])) / math.fsum(w)

    def realized_proposals(self, mode: EstimatorMode, n: int) -> int:
        if mode is EstimatorMode.VANILLA:
            return int(self.tour_ends[self._vanilla_tour_count(n) - 1])
        return n - 1

    def running_standard(self, f, checkpoints: Sequence[int]) -> np.ndarray:
        """Standard estimates at each budget in ``checkpoints``."""
        t = np.asarray(checkpoints)
        cum = np.cumsum(_batch(f, self.states[: t.max()]))
        return cum[t - 1] / t

    def running_vanilla(self, f, checkpoints: Sequence[int]) -> np.ndarray:
        """Vanilla estimates at each budget in ``checkpoints``."""
        cum_w = np.cumsum(self.tour_weights)
        cum_wf = np.cumsum(self.tour_weights * _batch(f, self.tour_states))
        idx = np.array([self._vanilla_tour_count(int(n)) - 1 for n in checkpoints])
        return cum_wf[idx] / cum_w[idx]


def simulate_mh_trace(
    target: TargetModel,
    proposal: ProposalKernel,
    sample_budget: int,
    rng_spec: RngStreamSpec,
    initial=None,
    max_tour_length: int = DEFAULT_MAX_TOUR_LENGTH,
) -> MhTrace:
    """Run one chain long enough for every mode at ``sample_budget``.

    Draws are consumed in the same order as :func:`run_mh_estimator`, so the
    trace reproduces each per-mode run on the same stream.
    """
    started = time.perf_counter()
    rng = rng_spec.generator()
    x = initial_state(initial or FromExactSampler(), target, proposal, rng)
    min_steps = max(sample_budget - 1, 1)
    states, props, alphas, accepted = [x], [], [], []
    t_states, t_weights, t_ends = [], [], []
    weight = product = 1.0
    tour_length = 0
    i = 0
    while True:
        i += 1
        y = proposal.sample(x, rng)
        alpha = acceptance_probability(target, proposal, x, y)
        product *= 1.0 - alpha
        weight += product
        tour_length += 1
        ok = rng.random() < alpha
        props.append(y)
        alphas.append(alpha)
        accepted.append(ok)
        if ok:
            t_states.append(x)
            t_weights.append(weight)
            t_ends.append(i)
            weight = product = 1.0
            tour_length = 0
            x = y
            states.append(x)
            if i >= min_steps:
                break
        else:
            states.append(x)
            if tour_length >= max_tour_length:
                raise DegenerateConfigurationError(
                    f"no acceptance within {max_tour_length} proposals from state {x!r}"
                )
    return MhTrace(
        states=np.asarray(states),
        proposals=np.asarray(props),
        alphas=np.asarray(alphas, dtype=float),
        accepted=np.asarray(accepted, dtype=bool),
        tour_states=np.asarray(t_states),
        tour_weights=np.asarray(t_weights, dtype=float),
        tour_ends=np.asarray(t_ends, dtype=np.int64),
        seconds=time.perf_counter() - started,
    )
