import numpy as np
import pytest

from btcforecast.data_ingest import load_manifest
from btcforecast.fixture import fixture_manifest_path


@pytest.fixture(scope="session")
def fixture_dataset():
    return load_manifest(fixture_manifest_path())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
