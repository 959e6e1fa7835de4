"""Proposal kernels ``Q(x, .)`` with conditional log densities ``log q(x, y)``.

Every kernel draws from an explicit generator. Continuous kernels also expose
``ppf(x, u)``, the conditional quantile function, which the experiment harness
uses to integrate the expected acceptance rate numerically.
"""

from __future__ import annotations

import abc
import bisect
import math
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .model import TargetModel
from .rng import open_unit

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _normal_logpdf(y, loc, scale):
    z = (y - loc) / scale
    return -0.5 * z * z - math.log(scale) - _LOG_SQRT_2PI


class ProposalKernel(abc.ABC):
    """Conditional sampler plus conditional log density.

    ``symmetric`` is informational: samplers always evaluate the full
    acceptance ratio, so a symmetric kernel only has to satisfy
    ``log_density(x, y) == log_density(y, x)``.
    """

    symmetric = False

    @abc.abstractmethod
    def sample(self, x, rng: np.random.Generator):
        ...

    @abc.abstractmethod
    def log_density(self, x, y) -> float:
        ...

    def ppf(self, x, u):
        raise NotImplementedError(f"{type(self).__name__} has no quantile function")


class GaussianRandomWalk(ProposalKernel):
    """``y = x + scale * xi`` with ``xi ~ N(0, 1)``."""

    symmetric = True

    def __init__(self, scale: float):
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.scale = float(scale)

    def sample(self, x, rng):
        return x + self.scale * rng.standard_normal()

    def log_density(self, x, y):
        return _normal_logpdf(y, x, self.scale)

    def ppf(self, x, u):
        return x + self.scale * ndtri(u)

    def __repr__(self):
        return f"GaussianRandomWalk(scale={self.scale})"


class IndependenceProposal(ProposalKernel):
    """A kernel that ignores the current state.

    Doubles as a transfer (regeneration) distribution for the restore
    sampler through :meth:`draw` and :meth:`log_pdf`.
    """

    @abc.abstractmethod
    def draw(self, rng):
        ...

    @abc.abstractmethod
    def log_pdf(self, y) -> float:
        ...

    def quantile(self, u):
        raise NotImplementedError(f"{type(self).__name__} has no quantile function")

    def sample(self, x, rng):
        return self.draw(rng)

    def log_density(self, x, y):
        return self.log_pdf(y)

    def ppf(self, x, u):
        return self.quantile(u)


class IndependentGaussian(IndependenceProposal):
    def __init__(self, loc: float = 0.0, scale: float = 1.0):
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.loc = float(loc)
        self.scale = float(scale)

    def draw(self, rng):
        return self.loc + self.scale * rng.standard_normal()

    def log_pdf(self, y):
        return _normal_logpdf(y, self.loc, self.scale)

    def quantile(self, u):
        return self.loc + self.scale * ndtri(u)

    def __repr__(self):
        return f"IndependentGaussian(loc={self.loc}, scale={self.scale})"


class IndependentCauchy(IndependenceProposal):
    def __init__(self, loc: float = 0.0, scale: float = 1.0):
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.loc = float(loc)
        self.scale = float(scale)
        self._log_norm = math.log(math.pi * self.scale)

    def draw(self, rng):
        return self.loc + self.scale * math.tan(math.pi * (rng.random() - 0.5))

    def log_pdf(self, y):
        z = (y - self.loc) / self.scale
        return -self._log_norm - math.log1p(z * z)

    def quantile(self, u):
        return self.loc + self.scale * np.tan(np.pi * (np.asarray(u) - 0.5))

    def __repr__(self):
        return f"IndependentCauchy(loc={self.loc}, scale={self.scale})"


class IndependentExponential(IndependenceProposal):
    """Exp(rate) on ``[0, inf)``, density ``rate * exp(-rate * y)``."""

    def __init__(self, rate: float = 1.0):
        if not rate > 0:
            raise ValueError("rate must be positive")
        self.rate = float(rate)
        self._log_rate = math.log(self.rate)

    def draw(self, rng):
        return -math.log(open_unit(rng)) / self.rate

    def log_pdf(self, y):
        if y < 0:
            return -math.inf
        return self._log_rate - self.rate * y

    def quantile(self, u):
        return -np.log1p(-np.asarray(u)) / self.rate

    def __repr__(self):
        return f"IndependentExponential(rate={self.rate})"


class DiscreteMatrixProposal(ProposalKernel):
    """Row-stochastic matrix ``M[x, y] = q(x, y)`` on ``{0..K-1}``."""

    def __init__(self, matrix, atol: float = 1e-12):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise ValueError("proposal matrix must be square with at least 2 states")
        if np.any(m < 0):
            raise ValueError("proposal matrix has negative entries")
        if np.any(np.abs(m.sum(axis=1) - 1.0) > atol):
            raise ValueError("proposal matrix rows must sum to 1")
        self.matrix = m
        self.symmetric = bool(np.array_equal(m, m.T))
        with np.errstate(divide="ignore"):
            self._log = np.log(m).tolist()
        self._cumulative = [list(np.cumsum(row)) for row in m]
        self._last_positive = [int(np.flatnonzero(row)[-1]) for row in m]

    @property
    def state_count(self):
        return self.matrix.shape[0]

    def sample(self, x, rng):
        idx = bisect.bisect_right(self._cumulative[x], rng.random())
        # rounding in the cumulative row can leave a sliver past the last entry
        return min(idx, self._last_positive[x])

    def log_density(self, x, y):
        return self._log[x][y]

    @classmethod
    def uniform(cls, state_count: int) -> "DiscreteMatrixProposal":
        return cls(np.full((state_count, state_count), 1.0 / state_count))

    @classmethod
    def independent(cls, weights: Sequence[float]) -> "DiscreteMatrixProposal":
        w = np.asarray(weights, dtype=float)
        row = w / w.sum()
        return cls(np.tile(row, (len(row), 1)))

    def __repr__(self):
        return f"DiscreteMatrixProposal({self.matrix.tolist()})"


class DiscreteIndependence(IndependenceProposal):
    """Fixed distribution on ``{0..K-1}``; usable as a discrete transfer kernel."""

    def __init__(self, weights: Sequence[float]):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or len(w) < 2 or np.any(w < 0) or not w.sum() > 0:
            raise ValueError("need at least 2 nonnegative weights with positive sum")
        self.probabilities = w / w.sum()
        with np.errstate(divide="ignore"):
            self._log = np.log(self.probabilities).tolist()
        self._cumulative = list(np.cumsum(self.probabilities))
        self._last_positive = int(np.flatnonzero(self.probabilities)[-1])

    def draw(self, rng):
        idx = bisect.bisect_right(self._cumulative, rng.random())
        return min(idx, self._last_positive)

    def log_pdf(self, y):
        return self._log[y]

    def __repr__(self):
        return f"DiscreteIndependence({self.probabilities.tolist()})"


class PointMassProposal(ProposalKernel):
    """Always proposes the current state; every move is accepted and changes nothing."""

    symmetric = True

    def sample(self, x, rng):
        return x

    def log_density(self, x, y):
        return 0.0 if x == y else -math.inf

    def __repr__(self):
        return "PointMassProposal()"


class LangevinProposal(ProposalKernel):
    """First-order Langevin move ``y = x + (eps^2 / 2) grad log pi(x) + eps * xi``.

    The conditional density is Gaussian around the drifted mean, which makes
    the kernel asymmetric whenever the gradient is not constant.
    """

    def __init__(self, target: TargetModel, step: float):
        if target.log_gradient is None:
            raise ValueError(f"target {target.name!r} has no log_gradient")
        if not step > 0:
            raise ValueError("step must be positive")
        self.target = target
        self.step = float(step)

    def _mean(self, x):
        return x + 0.5 * self.step * self.step * self.target.log_gradient(x)

    def sample(self, x, rng):
        return self._mean(x) + self.step * rng.standard_normal()

    def log_density(self, x, y):
        return _normal_logpdf(y, self._mean(x), self.step)

    def ppf(self, x, u):
        return self._mean(x) + self.step * ndtri(u)

    def __repr__(self):
        return f"LangevinProposal(step={self.step})"


class MixtureProposal(ProposalKernel):
    """``(1 - delta) * local + delta * transfer``.

    With ``delta`` exactly 0 or 1 no component coin is drawn, so the kernel
    consumes the same random stream as the pure component.
    """

    def __init__(self, local: ProposalKernel, transfer: IndependenceProposal, delta: float):
        if not 0.0 <= delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        self.local = local
        self.transfer = transfer
        self.delta = float(delta)
        self.symmetric = (delta == 0.0 and local.symmetric)
        if 0.0 < self.delta < 1.0:
            self._log_keep = math.log1p(-self.delta)
            self._log_jump = math.log(self.delta)

    def sample(self, x, rng):
        if self.delta == 0.0:
            return self.local.sample(x, rng)
        if self.delta == 1.0:
            return self.transfer.draw(rng)
        if rng.random() < self.delta:
            return self.transfer.draw(rng)
        return self.local.sample(x, rng)

    def log_density(self, x, y):
        if self.delta == 0.0:
            return self.local.log_density(x, y)
        if self.delta == 1.0:
            return self.transfer.log_pdf(y)
        a = self._log_keep + self.local.log_density(x, y)
        b = self._log_jump + self.transfer.log_pdf(y)
        if a == -math.inf and b == -math.inf:
            return -math.inf
        hi, lo = (a, b) if a >= b else (b, a)
        return hi + math.log1p(math.exp(lo - hi))

    def __repr__(self):
        return f"MixtureProposal({self.local!r}, {self.transfer!r}, delta={self.delta})"


def proposal_row(proposal: ProposalKernel, x, state_count: int) -> np.ndarray:
    """Probabilities ``q(x, .)`` over a finite state space."""
    return np.array([math.exp(proposal.log_density(x, y)) for y in range(state_count)])


__all__ = [
    "ProposalKernel",
    "GaussianRandomWalk",
    "IndependenceProposal",
    "IndependentGaussian",
    "IndependentCauchy",
    "IndependentExponential",
    "DiscreteMatrixProposal",
    "DiscreteIndependence",
    "PointMassProposal",
    "LangevinProposal",
    "MixtureProposal",
    "proposal_row",
]
