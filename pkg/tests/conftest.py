import numpy as np
import pytest

from lvbif.params import Params
from lvbif.spectrum import assemble_neumann_laplacian, build_grid, eigenpairs


@pytest.fixture(scope="session")
def grid256():
    return build_grid(2, 256)


@pytest.fixture(scope="session")
def op256(grid256):
    return assemble_neumann_laplacian(grid256)


@pytest.fixture(scope="session")
def pairs256(op256, grid256):
    return eigenpairs(op256, grid256, 4)


@pytest.fixture(scope="session")
def p16():
    """sigma = mu family with exactly one bifurcation point (k = 1)."""
    return Params(16.0, 16.0, 2.0, 1.0, 2)


@pytest.fixture(scope="session")
def p64():
    """sigma = mu family with two bifurcation points (k = 2)."""
    return Params(64.0, 64.0, 2.0, 1.0, 2)


@pytest.fixture(scope="session")
def p_worked():
    """The exactly solvable algebra case (a,b) = (3/7, 1/7) at beta = 2."""
    return Params(1.0, 1.0, 2.0, 1.0, 2)


def random_params(rng: np.random.Generator, sigma_eq_mu: bool = False) -> Params:
    mu = 10.0 ** rng.uniform(-1.5, 1.5)
    sigma = mu if sigma_eq_mu else mu * 10.0 ** rng.uniform(0, 1.5)
    gamma = 10.0 ** rng.uniform(-1.5, 1.5)
    alpha = gamma * 10.0 ** rng.uniform(0.01, 1.5)
    return Params(mu, sigma, alpha, gamma, 2)


def random_beta(rng: np.random.Generator, p: Params, hi_factor: float = 1e4) -> float:
    return p.beta_min * (1.0 + 1e-6) * 10.0 ** rng.uniform(0, np.log10(hi_factor))
