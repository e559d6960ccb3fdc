from dataclasses import replace

import pytest

from migsched.model import fit
from migsched.oracle import OracleConfig, default_pairings, default_workload_suite, generate_dataset
from migsched.statespace import StateSpace

NOISY_SEED = 7


@pytest.fixture(scope="session")
def config():
    return OracleConfig()


@pytest.fixture(scope="session")
def suite(config):
    return default_workload_suite(config)


@pytest.fixture(scope="session")
def apps(suite):
    return [a for a, _ in suite]


@pytest.fixture(scope="session")
def space():
    return StateSpace()


@pytest.fixture(scope="session")
def clean_data(apps, space, config):
    return generate_dataset(apps, space, default_pairings(apps), config)


@pytest.fixture(scope="session")
def profiles(clean_data):
    return {p.app_id: p for p in clean_data[0]}


@pytest.fixture(scope="session")
def clean_table(clean_data):
    return fit(clean_data[1])


@pytest.fixture(scope="session")
def noisy_table(apps, space, config):
    cfg = replace(config, noise_sigma=0.01, seed=NOISY_SEED)
    return fit(generate_dataset(apps, space, default_pairings(apps), cfg)[1])
