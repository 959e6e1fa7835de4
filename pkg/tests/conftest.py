"""Shared fixtures, exact oracles and the acceptance-suite summary hook."""

from fractions import Fraction

import pytest

from rbmc.core import DiscreteMatrixProposal, discrete_target

# Three-state toy problem used throughout: weights 5:3:2, uniform proposal.
THREE_STATE_WEIGHTS = (0.5, 0.3, 0.2)

ACCEPTANCE_LINES = []


def fraction_alpha(weights, x, y, qmatrix=None):
    """min(1, pi(y) q(y,x) / (pi(x) q(x,y))) in exact rational arithmetic."""
    w = [Fraction(v).limit_denominator(10**6) for v in weights]
    if qmatrix is None:
        return min(Fraction(1), w[y] / w[x])
    num = w[y] * qmatrix[y][x]
    den = w[x] * qmatrix[x][y]
    return Fraction(1) if den == 0 else min(Fraction(1), num / den)


def uniform_fraction_matrix(k):
    return [[Fraction(1, k)] * k for _ in range(k)]


def fraction_a(weights, x, qmatrix=None):
    """Expected acceptance a(x), exact."""
    k = len(weights)
    q = qmatrix or uniform_fraction_matrix(k)
    return sum(q[x][y] * fraction_alpha(weights, x, y, q) for y in range(k) if q[x][y] > 0)


def fraction_r2(weights, x, qmatrix=None):
    """Second moment of the rejection probability r2(x), exact."""
    k = len(weights)
    q = qmatrix or uniform_fraction_matrix(k)
    return sum(q[x][y] * (1 - fraction_alpha(weights, x, y, q)) ** 2
               for y in range(k) if q[x][y] > 0)


@pytest.fixture
def three_state():
    return discrete_target(THREE_STATE_WEIGHTS), DiscreteMatrixProposal.uniform(3)


@pytest.fixture
def half_acceptance():
    """From state 0 every proposal goes to state 1 and is accepted w.p. exactly 1/2."""
    return discrete_target([2.0, 1.0]), DiscreteMatrixProposal([[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line for the end-of-run acceptance summary."""

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
