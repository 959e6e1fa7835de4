"""Test functions the experiment tables estimate.

Each integrand is a plain callable with a vectorized ``batch`` method. The
expected-acceptance integrand ``a(x)`` has no closed form on continuous
spaces; it is integrated in the proposal's quantile space and tabulated once
per configuration so that millions of evaluations stay cheap.
"""

from __future__ import annotations

import warnings
from typing import Dict

import numpy as np
from scipy import integrate

from ..core.acceptance import acceptance_probability, expected_acceptance_exact
from ..core.model import TargetModel
from ..core.proposals import ProposalKernel
from .spec import IntegrandSpec

TABLE_POINTS = 801
OUTER_POINTS = 120
OUTER_REACH = 1e8
GRID_SCALE = 2.0


def sinh_grid(lo: float, hi: float, points: int, scale: float = GRID_SCALE) -> np.ndarray:
    """Nodes on ``[lo, hi]`` spaced evenly in ``asinh((x - c) / scale)``.

    ``c`` is 0 clipped into the interval, so nodes are dense near the origin
    and sparse in the tails, where ``a(x)`` varies slowly.
    """
    c = min(max(0.0, lo), hi)
    u = np.linspace(np.arcsinh((lo - c) / scale), np.arcsinh((hi - c) / scale), points)
    grid = c + scale * np.sinh(u)
    grid[0], grid[-1] = lo, hi
    return grid


class Identity:
    def __call__(self, x):
        return float(x)

    def batch(self, xs):
        return np.asarray(xs, dtype=float)


class Square:
    def __call__(self, x):
        return float(x) * float(x)

    def batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        return xs * xs


class Indicator:
    """``1{x > threshold}``."""

    def __init__(self, threshold: float = 0.0):
        self.threshold = threshold

    def __call__(self, x):
        return 1.0 if x > self.threshold else 0.0

    def batch(self, xs):
        return (np.asarray(xs, dtype=float) > self.threshold).astype(float)


class Constant:
    def __init__(self, value: float = 1.0):
        self.value = value

    def __call__(self, x):
        return self.value

    def batch(self, xs):
        return np.full(len(xs), self.value, dtype=float)


def acceptance_quad(target: TargetModel, proposal: ProposalKernel, x) -> float:
    """``a(x) = int_0^1 alpha(x, F^{-1}(x, u)) du`` by adaptive quadrature."""

    def integrand(u):
        return acceptance_probability(target, proposal, x, proposal.ppf(x, u))

    with warnings.catch_warnings():
        # kinks of alpha can stall the error estimate well below table accuracy
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, _ = integrate.quad(integrand, 0.0, 1.0, limit=200, epsabs=1e-10, epsrel=1e-8)
    return min(max(value, 0.0), 1.0)


class ExpectedAcceptance:
    """``a(x)`` on a continuous space.

    Values on ``[lo, hi]`` are linearly interpolated from a table of
    quadrature values on a :func:`sinh_grid`. Beyond each end a coarser
    table, uniform in ``log(1 + distance)``, reaches out to ``OUTER_REACH``;
    heavy-tailed proposals land there often and ``a(x)`` is smooth that far
    out. Points past the outer tables, and points outside the support of the
    target, fall back to direct quadrature.
    """

    def __init__(self, target: TargetModel, proposal: ProposalKernel,
                 lo: float = -60.0, hi: float = 60.0, points: int = TABLE_POINTS,
                 outer_points: int = OUTER_POINTS):
        self.target, self.proposal = target, proposal
        self.lo, self.hi = lo, hi
        self.grid = sinh_grid(lo, hi, points)
        self.values = self._quad(self.grid)
        # outer nodes in u = log1p(distance past the end of the inner table)
        self.outer_u = np.linspace(0.0, np.log1p(OUTER_REACH), outer_points)
        reach = np.expm1(self.outer_u)
        self.right = self._quad(hi + reach)
        self.left = self._quad(lo - reach)

    def _quad(self, xs) -> np.ndarray:
        return np.array([acceptance_quad(self.target, self.proposal, float(x)) for x in xs])

    def __call__(self, x):
        return float(self.batch([x])[0])

    def batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        out = np.interp(xs, self.grid, self.values)
        above, below = xs > self.hi, xs < self.lo
        if above.any():
            out[above] = np.interp(np.log1p(xs[above] - self.hi), self.outer_u, self.right)
        if below.any():
            out[below] = np.interp(np.log1p(self.lo - xs[below]), self.outer_u, self.left)
        far = (xs > self.hi + OUTER_REACH) | (xs < self.lo - OUTER_REACH) | np.isnan(xs)
        # a(x) jumps at the edge of the support, which no table can interpolate
        outside = (above | below) & ~far
        for i in np.flatnonzero(outside):
            far[i] = self.target.log_pi(float(xs[i])) == -np.inf
        for i in np.flatnonzero(far):
            out[i] = acceptance_quad(self.target, self.proposal, float(xs[i]))
        return out


class DiscreteExpectedAcceptance:
    """``a(x)`` on a finite space, by exact summation."""

    def __init__(self, target: TargetModel, proposal: ProposalKernel):
        self.table: Dict[int, float] = {
            z: expected_acceptance_exact(target, proposal, z) for z in target.reference.states()
        }
        self._array = np.array([self.table[z] for z in sorted(self.table)])

    def __call__(self, x):
        return self.table[int(x)]

    def batch(self, xs):
        return self._array[np.asarray(xs, dtype=np.int64)]


def build_integrand(spec: IntegrandSpec, target: TargetModel, proposal: ProposalKernel):
    if spec.kind == "x":
        return Identity()
    if spec.kind == "x2":
        return Square()
    if spec.kind == "indicator":
        return Indicator(spec.threshold)
    if spec.kind == "constant":
        return Constant(spec.value)
    if spec.kind == "acceptance":
        if target.reference.is_discrete:
            return DiscreteExpectedAcceptance(target, proposal)
        return ExpectedAcceptance(target, proposal, spec.lo, spec.hi)
    raise ValueError(f"unknown integrand kind {spec.kind!r}")
