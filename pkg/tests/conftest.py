import pytest

from a3ps.env import EnvConfig, LaneSpec, RewardConfig, oracle_policy


@pytest.fixture(scope="session")
def default_config():
    return EnvConfig()


@pytest.fixture(scope="session")
def dense_oracle(default_config):
    return oracle_policy(default_config, RewardConfig.dense())


@pytest.fixture(scope="session")
def sparse_oracle(default_config):
    return oracle_policy(default_config, RewardConfig.sparse())


def lane(row, direction, period, *offsets):
    return LaneSpec(row, direction, period, tuple(offsets))
