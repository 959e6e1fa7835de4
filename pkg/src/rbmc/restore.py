"""Jump Restore sampler with Metropolis-Hastings local dynamics.

Each tour starts at a draw from the transfer distribution, then races two
exponential clocks per holding interval: the holding clock (rate ``lambda``)
triggers one MH step with the local proposal, the killing clock (rate
``kappa(x)``) ends the tour. Estimates are ratios of sums over tours, with the
per-interval weights chosen by the estimator mode.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Sequence

import numpy as np

from .core.acceptance import acceptance_probability
from .core.model import TargetModel
from .core.proposals import IndependenceProposal, MixtureProposal, ProposalKernel
from .core.rng import RngStreamSpec, exponential
from .errors import DegenerateConfigurationError
from .mh import EstimatorMode, FromExactSampler, MhResult, MhRunConfig, run_mh_estimator

LOCAL_STREAM = 0
TRANSFER_STREAM = 1


@dataclass(frozen=True)
class WithNormalization:
    """``kappa = c * C * q / pi``; needs the target's exact normalization ``C``."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("rate constant must be positive")


@dataclass(frozen=True)
class Absorbed:
    """``kappa = c_tilde * q / pi`` with the normalization folded into ``c_tilde``."""

    c_tilde: float

    def __post_init__(self):
        if not self.c_tilde > 0:
            raise ValueError("rate constant must be positive")


class Terminal(enum.Enum):
    LOCAL_TRANSITION = "local"
    REGENERATION = "regeneration"


@dataclass(frozen=True)
class JumpEvent:
    duration: float
    occupying_state: Any
    terminal: Terminal


@dataclass
class TourOutput:
    """Weights and weighted sums one tour contributes to the ratio estimator.

    ``lifetime`` is the accumulated estimator weight (the denominator term);
    ``elapsed`` is the tour's actual duration, the sum of its holding
    intervals, which is what normalization estimation needs.
    """

    lifetime: float
    weighted_sums: List[float]
    elapsed: float
    local_steps: int
    acceptances: int
    events: Optional[List[JumpEvent]] = None


@dataclass(frozen=True)
class RestoreConfig:
    target: TargetModel
    local_proposal: ProposalKernel
    transfer: IndependenceProposal
    tour_budget: int
    mode: EstimatorMode
    rng: RngStreamSpec
    holding_rate: float = 1.0
    rate: Any = field(default_factory=lambda: Absorbed(1.0))
    max_events_per_tour: int = 10**7
    max_regeneration_retries: int = 1000
    # False: the terminating interval is weighted by the holding-clock draw,
    # exactly as the generic Rao-Blackwellized restore loop is written.
    # True: weight it by the killing-clock draw (the interval actually elapsed).
    exact_terminal_interval: bool = False

    def __post_init__(self):
        if int(self.tour_budget) < 1:
            raise ValueError("tour_budget must be at least 1")
        if not self.holding_rate > 0:
            raise ValueError("holding_rate must be positive")
        if not isinstance(self.rate, (WithNormalization, Absorbed)):
            raise TypeError("rate must be WithNormalization or Absorbed")
        if isinstance(self.rate, WithNormalization) and self.target.exact_normalization is None:
            raise ValueError("WithNormalization needs target.exact_normalization")


def killing_rate(config: RestoreConfig, x) -> float:
    """``c * C * q(x) / pi(x)`` or ``c_tilde * q(x) / pi(x)``; ``inf`` where ``pi = 0``."""
    log_pi = config.target.log_pi(x)
    if log_pi == -math.inf:
        return math.inf
    rate = config.rate
    if isinstance(rate, WithNormalization):
        norm = config.target.exact_normalization
        if norm is None:
            raise ValueError("WithNormalization needs target.exact_normalization")
        log_const = math.log(rate.c * norm)
    else:
        log_const = math.log(rate.c_tilde)
    log_kappa = log_const + config.transfer.log_pdf(x) - log_pi
    if log_kappa > 709.0:
        return math.inf
    return math.exp(log_kappa)


def _regenerate(config: RestoreConfig, rng):
    target = config.target
    for _ in range(config.max_regeneration_retries):
        x = config.transfer.draw(rng)
        if target.log_pi(x) > -math.inf:
            return x
    raise DegenerateConfigurationError(
        f"{config.max_regeneration_retries} regenerations in a row landed where pi = 0"
    )


def simulate_tour(
    config: RestoreConfig,
    integrands: Sequence[Callable[[Any], float]],
    local_rng: np.random.Generator,
    transfer_rng: np.random.Generator,
    record_events: bool = False,
) -> TourOutput:
    """Simulate one tour and return its estimator contributions.

    The regeneration point comes from ``transfer_rng`` only; clocks, local
    proposals and accept/reject uniforms come from ``local_rng``.
    """
    target, proposal, mode = config.target, config.local_proposal, config.mode
    standard = mode is EstimatorMode.STANDARD
    waste = mode is EstimatorMode.WASTE_RECYCLING
    vanilla = mode is EstimatorMode.VANILLA
    lam = config.holding_rate

    weights: List[float] = []
    sums: List[List[float]] = [[] for _ in integrands]
    durations: List[float] = []
    events: Optional[List[JumpEvent]] = [] if record_events else None
    weight = product = 1.0
    local_steps = acceptances = 0

    def add(w, values):
        weights.append(w)
        for terms, v in zip(sums, values):
            terms.append(v)

    x = _regenerate(config, transfer_rng)
    while True:
        if len(durations) >= config.max_events_per_tour:
            raise DegenerateConfigurationError(
                f"tour exceeded {config.max_events_per_tour} holding intervals"
            )
        kappa = killing_rate(config, x)
        dt1 = exponential(local_rng, lam)
        dt2 = 0.0 if kappa == math.inf else exponential(local_rng, kappa)
        # a float tie counts as a local transition; infinite kappa always kills
        if kappa < math.inf and dt1 <= dt2:
            durations.append(dt1)
            if standard:
                add(dt1, [dt1 * f(x) for f in integrands])
            y = proposal.sample(x, local_rng)
            alpha = acceptance_probability(target, proposal, x, y)
            local_steps += 1
            if vanilla:
                product *= 1.0 - alpha
                weight += product
            if waste:
                add(dt1, [dt1 * ((1.0 - alpha) * f(x) + alpha * f(y)) for f in integrands])
            if events is not None:
                events.append(JumpEvent(dt1, x, Terminal.LOCAL_TRANSITION))
            if local_rng.random() < alpha:
                acceptances += 1
                if vanilla:
                    w = weight / (lam + kappa)
                    add(w, [w * f(x) for f in integrands])
                    weight = product = 1.0
                x = y
        else:
            durations.append(dt2)
            if events is not None:
                events.append(JumpEvent(dt2, x, Terminal.REGENERATION))
            if vanilla:
                w = weight / (lam + kappa)
                add(w, [w * f(x) for f in integrands])
            else:
                dt = dt2 if config.exact_terminal_interval else dt1
                add(dt, [dt * f(x) for f in integrands])
            return TourOutput(
                lifetime=math.fsum(weights),
                weighted_sums=[math.fsum(t) for t in sums],
                elapsed=math.fsum(durations),
                local_steps=local_steps,
                acceptances=acceptances,
                events=events,
            )


@dataclass
class RestoreResult:
    estimates: List[float]
    mode: EstimatorMode
    total_lifetime: float
    total_elapsed: float
    tour_count: int
    local_steps: int
    tours: List[TourOutput]

    @property
    def mean_tour_lifetime(self) -> float:
        return self.total_elapsed / self.tour_count


def run_jump_restore(
    config: RestoreConfig,
    integrands: Sequence[Callable[[Any], float]],
    record_events: bool = False,
) -> RestoreResult:
    """Sum ``tour_budget`` tours and return ``sum(weighted sums) / sum(lifetimes)``."""
    if not integrands:
        raise ValueError("need at least one integrand")
    local_rng = config.rng.generator(LOCAL_STREAM)
    transfer_rng = config.rng.generator(TRANSFER_STREAM)
    tours = [
        simulate_tour(config, integrands, local_rng, transfer_rng, record_events)
        for _ in range(config.tour_budget)
    ]
    total = math.fsum(t.lifetime for t in tours)
    if not total > 0:
        raise DegenerateConfigurationError("total tour weight is not positive")
    sums = [math.fsum(t.weighted_sums[k] for t in tours) for k in range(len(integrands))]
    return RestoreResult(
        estimates=[s / total for s in sums],
        mode=config.mode,
        total_lifetime=total,
        total_elapsed=math.fsum(t.elapsed for t in tours),
        tour_count=len(tours),
        local_steps=sum(t.local_steps for t in tours),
        tours=tours,
    )


def estimate_normalization(c_tilde: float, total_lifetime: float, tour_count: int) -> float:
    """``c_tilde * total_lifetime / tour_count``, the normalization constant estimate.

    ``total_lifetime`` must be the summed actual tour durations of a run with
    the absorbed killing rate.
    """
    if not c_tilde > 0 or not total_lifetime > 0 or tour_count < 1:
        raise ValueError("need positive c_tilde, lifetime and tour count")
    return c_tilde * total_lifetime / tour_count


def mixture_mh_baseline(
    config: RestoreConfig,
    delta: float,
    sample_budget: int,
    integrands: Sequence[Callable[[Any], float]],
    initial=None,
) -> MhResult:
    """Plain MH with the mixture ``(1 - delta) * local + delta * transfer``.

    Reuses the restore configuration's target, kernels, mode and stream, so
    the classical large-step baseline can be compared on equal terms.
    """
    proposal = MixtureProposal(config.local_proposal, config.transfer, delta)
    mh_config = MhRunConfig(
        target=config.target,
        proposal=proposal,
        sample_budget=sample_budget,
        mode=config.mode,
        rng=config.rng,
        initial_state=initial or FromExactSampler(),
    )
    return run_mh_estimator(mh_config, integrands)
