import numpy as np
import pytest

from swipt.fading import discretize_exponential, joint_product
from swipt.system import SystemConfig
from swipt.units import kbps_to_nats

RHO_NATS = (kbps_to_nats(300.0), kbps_to_nats(150.0))


@pytest.fixture(scope="session")
def paper_marginals():
    return (
        discretize_exponential(0.8, 0.1, 10.0, user=0),
        discretize_exponential(0.5, 0.1, 10.0, user=1),
    )


@pytest.fixture(scope="session")
def paper_joint(paper_marginals):
    return joint_product(list(paper_marginals))


@pytest.fixture(scope="session")
def paper_config():
    return SystemConfig(
        num_users=2,
        noise_vars=[0.8, 1.6],
        min_rates=list(RHO_NATS),
        deficits=[60e-6, 30e-6],
        efficiency=1e-4,
        tx_budget=10.0,
        architectures=["ideal", "ideal"],
        rx_ambient_mean=[30e-6, 20e-6],
        rx_consumption_mean=[90e-6, 50e-6],
    )


@pytest.fixture(scope="session")
def small_joint():
    """Fast 15x15-state version of the same fading construction."""
    m1 = discretize_exponential(0.8, 0.5, 7.5, user=0)
    m2 = discretize_exponential(0.5, 0.5, 7.5, user=1)
    return joint_product([m1, m2])
