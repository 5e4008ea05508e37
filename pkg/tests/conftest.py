import numpy as np
import pytest

from risim.channel import build_geometry, draw_channels
from risim.config import NLOS, SystemConfig
from risim.ldpc import build_ldpc

TOY_SEED = 13   # (3,6) n=16 code with d_min 4; see tests for the SPA/ML check


@pytest.fixture(scope="session")
def los_config():
    return SystemConfig()


@pytest.fixture(scope="session")
def nlos_config():
    return SystemConfig(scenario=NLOS, pilot_len=96)


@pytest.fixture(scope="session")
def code512(los_config):
    return build_ldpc(los_config.ldpc_block_len, los_config.ldpc_rate,
                      los_config.ldpc_seed)


@pytest.fixture(scope="session")
def toy_code():
    return build_ldpc(16, 0.5, seed=TOY_SEED, allow_four_cycles=True)


@pytest.fixture()
def rng():
    return np.random.default_rng(2024)


@pytest.fixture(scope="session")
def los_channels(los_config):
    gains = build_geometry(los_config)
    return draw_channels(gains, los_config, np.random.default_rng(99))


@pytest.fixture(scope="session")
def nlos_channels(nlos_config):
    gains = build_geometry(nlos_config)
    return draw_channels(gains, nlos_config, np.random.default_rng(99))
