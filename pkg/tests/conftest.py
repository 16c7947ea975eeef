import numpy as np
import pytest

from mptraj import DmpConfig, precompute_basis

# alpha=25, tau=3, alpha_x=2, 25 basis functions over 3 s: the configuration
# most tests and all acceptance checks run against
REFERENCE_CONFIG = dict(alpha=25.0, tau=3.0, alpha_x=2.0, num_basis=25, duration=3.0)

# deliberately small and well conditioned (short horizon, few basis functions)
SMALL_CONFIG = dict(alpha=25.0, tau=1.0, alpha_x=2.0, num_basis=5, duration=1.0,
                    grid_dt=1.0 / 400.0)


@pytest.fixture(scope="session")
def reference_config():
    return DmpConfig(**REFERENCE_CONFIG)


@pytest.fixture(scope="session")
def reference_bank(reference_config):
    return precompute_basis(reference_config)


@pytest.fixture(scope="session")
def small_config():
    return DmpConfig(**SMALL_CONFIG)


@pytest.fixture(scope="session")
def small_bank(small_config):
    return precompute_basis(small_config)


def random_weights_distribution(dofs, weight_dim, rng, scale=0.5):
    from mptraj import WeightsDistribution
    dim = dofs * weight_dim
    mat = rng.standard_normal((dim, dim)) * scale
    cov = mat @ mat.T + 1e-6 * np.eye(dim)
    return WeightsDistribution.from_covariance(rng.standard_normal(dim) * 2.0, cov)
