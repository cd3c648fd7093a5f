import numpy as np
import pytest

from scenebench.fixtures import make_asset_pool
from scenebench.synth import AssetPool, generate_dataset, plan_dataset

MASTER_SEED = 20160901


@pytest.fixture(scope="session")
def pool_dir(tmp_path_factory):
    return make_asset_pool(tmp_path_factory.mktemp("pool"), per_class=6, seed=3)


@pytest.fixture(scope="session")
def pool(pool_dir):
    return AssetPool.from_directory(pool_dir)


@pytest.fixture(scope="session")
def test_dataset(pool, tmp_path_factory):
    out = tmp_path_factory.mktemp("test_split")
    summary = generate_dataset(plan_dataset("test", MASTER_SEED), pool, out)
    return out, summary


@pytest.fixture(scope="session")
def dev_dataset(pool, tmp_path_factory):
    out = tmp_path_factory.mktemp("dev_split")
    summary = generate_dataset(plan_dataset("dev", MASTER_SEED), pool, out)
    return out, summary


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
