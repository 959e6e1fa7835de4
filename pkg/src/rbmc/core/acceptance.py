"""Metropolis-Hastings acceptance function and exact finite-space oracles."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DegenerateConfigurationError
from .model import TargetModel
from .proposals import ProposalKernel

_INF = math.inf


def _checked(value, what):
    if value != value or value == _INF:
        raise ValueError(f"{what} returned {value}")
    return value


def acceptance_probability(target: TargetModel, proposal: ProposalKernel, x, y) -> float:
    """``min(1, pi(y) q(y, x) / (pi(x) q(x, y)))``, or 1 when the denominator vanishes.

    Evaluated in log space and never exponentiates a positive number, so
    log densities of any finite magnitude are safe.
    """
    log_den = _checked(target.log_density(x), "log_density") + _checked(
        proposal.log_density(x, y), "proposal log_density"
    )
    if log_den == -_INF:
        return 1.0
    log_num = _checked(target.log_density(y), "log_density") + _checked(
        proposal.log_density(y, x), "proposal log_density"
    )
    log_ratio = log_num - log_den
    if log_ratio >= 0.0:
        return 1.0
    return math.exp(log_ratio)


def _require_discrete(target: TargetModel) -> int:
    if not target.reference.is_discrete:
        raise ValueError("exact summation needs a finite discrete reference")
    return target.reference.state_count


def expected_acceptance_exact(target: TargetModel, proposal: ProposalKernel, x) -> float:
    """``a(x) = sum_y q(x, y) alpha(x, y)`` by exhaustive summation."""
    k = _require_discrete(target)
    terms = []
    for y in range(k):
        lq = proposal.log_density(x, y)
        if lq == -_INF:
            continue
        terms.append(math.exp(lq) * acceptance_probability(target, proposal, x, y))
    return math.fsum(terms)


def rejection_second_moment_exact(target: TargetModel, proposal: ProposalKernel, x) -> float:
    """``r2(x) = sum_y q(x, y) (1 - alpha(x, y))^2`` by exhaustive summation.

    Raises:
        DegenerateConfigurationError: if ``r2(x) == 1``, i.e. no proposal from
            ``x`` can ever be accepted.
    """
    k = _require_discrete(target)
    terms = []
    for y in range(k):
        lq = proposal.log_density(x, y)
        if lq == -_INF:
            continue
        reject = 1.0 - acceptance_probability(target, proposal, x, y)
        terms.append(math.exp(lq) * reject * reject)
    r2 = math.fsum(terms)
    if r2 >= 1.0:
        raise DegenerateConfigurationError(
            f"rejection second moment is 1 at state {x}: no proposal is ever accepted"
        )
    return r2


def acceptance_matrix(target: TargetModel, proposal: ProposalKernel) -> np.ndarray:
    k = _require_discrete(target)
    return np.array(
        [[acceptance_probability(target, proposal, x, y) for y in range(k)] for x in range(k)]
    )


def proposal_matrix(target: TargetModel, proposal: ProposalKernel) -> np.ndarray:
    k = _require_discrete(target)
    return np.array(
        [[math.exp(proposal.log_density(x, y)) for y in range(k)] for x in range(k)]
    )


def target_probabilities(target: TargetModel) -> np.ndarray:
    k = _require_discrete(target)
    w = np.array([math.exp(target.log_pi(x)) for x in range(k)])
    return w / w.sum()


def mh_transition_matrix(target: TargetModel, proposal: ProposalKernel) -> np.ndarray:
    """One-step MH kernel ``P[x, y]`` on a finite space."""
    q = proposal_matrix(target, proposal)
    a = acceptance_matrix(target, proposal)
    p = q * a
    np.fill_diagonal(p, 0.0)
    np.fill_diagonal(p, 1.0 - p.sum(axis=1))
    return p


def augmented_transition_matrix(target: TargetModel, proposal: ProposalKernel) -> np.ndarray:
    """Kernel of the (current state, next proposal) chain.

    Pair ``(x, y)`` is flattened to index ``x * K + y``. From ``(x, y)`` the
    chain keeps ``x`` with probability ``1 - alpha(x, y)`` or moves to ``y``,
    then draws a fresh proposal from the new current state.
    """
    k = _require_discrete(target)
    q = proposal_matrix(target, proposal)
    a = acceptance_matrix(target, proposal)
    kernel = np.zeros((k * k, k * k))
    for x in range(k):
        for y in range(k):
            row = kernel[x * k + y]
            row[x * k:(x + 1) * k] += (1.0 - a[x, y]) * q[x]
            row[y * k:(y + 1) * k] += a[x, y] * q[y]
    return kernel


def augmented_invariant(target: TargetModel, proposal: ProposalKernel) -> np.ndarray:
    """``mu_aug(x, y) = mu(x) q(x, y)``, flattened like :func:`augmented_transition_matrix`."""
    mu = target_probabilities(target)
    q = proposal_matrix(target, proposal)
    return (mu[:, None] * q).ravel()
