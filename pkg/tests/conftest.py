import numpy as np
import pytest

from stou import Lattice, StouParams, cholesky_factor, build_covariance, simulate_exact


@pytest.fixture(scope="session")
def base_params() -> StouParams:
    return StouParams.natural(lam=1.0, c=1.0, mu_seed=0.2, tau2=0.01)


@pytest.fixture(scope="session")
def small_lattice() -> Lattice:
    return Lattice(n_x=21, n_t=21, dx=0.05, dt=0.05)


@pytest.fixture(scope="session")
def small_field(base_params, small_lattice):
    factor = cholesky_factor(build_covariance(base_params, small_lattice))
    rng = np.random.default_rng(42)
    return simulate_exact(factor, base_params.mu, small_lattice, rng)
