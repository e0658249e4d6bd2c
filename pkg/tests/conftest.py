"""Shared fixtures: grids, probe functions and the worked example kernels."""

from fractions import Fraction

import numpy as np
import pytest

from markov_mimic import (
    CellMasses,
    Grid,
    SampledFunction,
    SubspaceSpec,
    from_composition,
    from_weighted_compositions,
)


@pytest.fixture(scope="session")
def grid4():
    return Grid(4)


@pytest.fixture(scope="session")
def grid100():
    return Grid(100)


@pytest.fixture(scope="session")
def grid400():
    return Grid(400)


@pytest.fixture(scope="session")
def spec_half():
    return SubspaceSpec.from_alpha(Fraction(1, 2))


def member_line(grid):
    """f(x) = (1+x)/2, a member of the ratio-1/2 subspace."""
    return SampledFunction(grid, (1 + grid.points) / 2)


def member_quad(grid):
    """f(x) = (1+x^2)/2, a member of the ratio-1/2 subspace."""
    return SampledFunction(grid, (1 + grid.points**2) / 2)


def kernel_square(grid):
    """Composition kernel of the endpoint-fixing map x -> x^2."""
    return from_composition(SampledFunction(grid, grid.points**2))


def kernel_two_map(grid, k1=3.0, k2=1.0):
    """Constant-weight average of identity and reflection, weights k1:k2."""
    ident = SampledFunction(grid, grid.points)
    refl = SampledFunction(grid, 1 - grid.points)
    return from_weighted_compositions(
        [ident, refl],
        [SampledFunction.constant(grid, k1), SampledFunction.constant(grid, k2)],
    )


@pytest.fixture(scope="session")
def f_line_100(grid100):
    return member_line(grid100)


@pytest.fixture(scope="session")
def f_line_400(grid400):
    return member_line(grid400)


@pytest.fixture(scope="session")
def f_quad_400(grid400):
    return member_quad(grid400)


@pytest.fixture(scope="session")
def kernel_square_100(grid100):
    return kernel_square(grid100)


@pytest.fixture(scope="session")
def kernel_two_map_100(grid100):
    return kernel_two_map(grid100)


@pytest.fixture(scope="session")
def toy_masses():
    """Exact three-cell instance for alpha=1/2, beta=3/4."""
    return CellMasses((29 / 40, 0.0, 11 / 40), (3 / 10, 0.0, 7 / 10))


def random_masses(rng, n, alpha, beta):
    """Random CellMasses satisfying the relations for the given ratios, or None."""
    alpha, beta = Fraction(alpha), Fraction(beta)
    shift = alpha * (1 - beta) / (1 - alpha)
    # draw mu1 freely, derive mu0 from the relations, reject if out of range
    mu1 = rng.dirichlet(np.ones(n))
    mu0 = np.empty(n)
    mu0[1:-1] = float(beta) * mu1[1:-1]
    mu0[-1] = float(beta) * mu1[-1] - float(shift)
    mu0[0] = 1 - mu0[1:].sum()
    if mu0.min() < 0 or mu0.max() > 1:
        return None
    return CellMasses(tuple(mu0), tuple(mu1))
