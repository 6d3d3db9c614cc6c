import numpy as np
import pytest

from bridge_trunc.core.ensembles import EnsembleKind, EnsembleSpec, sample_weights
from bridge_trunc.core.environment import sample_environment
from bridge_trunc.core.processes import Grid
from bridge_trunc.core.random_streams import RngState


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run acceptance-size Monte-Carlo tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def grid():
    return Grid(20)


@pytest.fixture
def haar_weights():
    return sample_weights(EnsembleSpec(EnsembleKind.UNITARY, 12), RngState(5).fixed(0))


@pytest.fixture
def environment():
    return sample_environment(12, RngState(5).fixed(1))


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / "reports"
