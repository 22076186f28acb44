import numpy as np
import pytest

from impactflow import ModelParams, simulate_tape, stream


@pytest.fixture(scope="session")
def rng():
    return stream(12345, "tests")


@pytest.fixture(scope="session")
def single_q_params():
    """Single child size, independent signs, mu = 1.5."""
    return ModelParams(
        nu=1.0,
        phi_child=10.0,
        mu1=1.5,
        lam=0.0,
        sigma_logq=0.0,
        m_logq=0.0,
        Gamma_amp=0.0,
        beta1=0.2,
        lambda_prime=0.0,
        theta0=1.0,
        seed=101,
    )


@pytest.fixture(scope="session")
def small_tape(single_q_params):
    return simulate_tape(single_q_params, 200_000)


@pytest.fixture(scope="session")
def lognormal_params():
    """Log-normal child sizes with the q-dependent duration tail."""
    return ModelParams(
        nu=1.0,
        phi_child=10.0,
        mu1=1.5,
        lam=0.125,
        sigma_logq=1.0,
        m_logq=0.0,
        Gamma_amp=0.0,
        beta1=0.3,
        lambda_prime=0.1,
        theta0=1.0,
        mu_floor=1.05,
        seed=202,
    )
