"""Shared fixtures: the reference shallow-water design and its truncation."""

import pytest

from hfmc.design import SystemConfig, select_parameters
from hfmc.waveform import truncate_transmit


@pytest.fixture(scope="session")
def table_config():
    """Reference scenario: 50 kHz carrier, 5 kHz band, 102.4 ms symbol."""
    return SystemConfig(
        f_c=50e3,
        bandwidth=5e3,
        symbol_time=0.1024,
        prefix_time=0.0256,
        a_max=3.43e-3,
        min_subcarriers=256,
    )


@pytest.fixture(scope="session")
def full_params(table_config):
    return select_parameters(table_config)


@pytest.fixture(scope="session")
def desk_params(full_params):
    """64-subcarrier truncation used for the quick Monte Carlo runs."""
    return truncate_transmit(full_params, 64)
