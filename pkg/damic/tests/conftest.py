import os

import numpy as np
import pytest

from damic.data import Dataset, SyntheticSpec, gen_synthetic
from damic.model import build_model
from damic.train import TrainConfig


def pytest_addoption(parser):
    parser.addoption('--integration', action='store_true', help='Run integration tests')


def pytest_configure(config):
    config.addinivalue_line(
        'markers', 'integration: full training runs, skipped without --integration')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--integration'):
        return
    skip = pytest.mark.skip(reason='needs --integration')
    for item in items:
        if 'integration' in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_model(rng):
    """A tiny two-cluster model on 5-dimensional inputs."""
    return build_model(5, 2, rng, ae_hidden=(4,), ae_bottleneck=2,
                       gate_hidden=(4,), embedding_dim=3)


@pytest.fixture
def blobs():
    """Two well separated groups of 20 points in [0, 1]^6, labelled."""
    r = np.random.default_rng(7)
    a = 0.2 + 0.03 * r.standard_normal((20, 6))
    b = 0.8 + 0.03 * r.standard_normal((20, 6))
    X = np.clip(np.vstack([a, b]), 0.0, 1.0)
    return Dataset(X, np.repeat([0, 1], 20), name='blobs')


@pytest.fixture
def small_synthetic():
    spec = SyntheticSpec(n_per_cluster=25, obs_dim=10, w_seed=3, noise_seed=4)
    return gen_synthetic(spec)[0]


@pytest.fixture
def fast_config():
    """Small networks and few epochs, for tests that exercise whole runs."""
    return TrainConfig(
        k=2, epochs=3, batch_size=16, seed=0, embedding_dim=3,
        ae_hidden=(4,), ae_bottleneck=2, gate_hidden=(4,),
        pretrain_epochs=3, gate_epochs=3, kmeans_restarts=2)


@pytest.fixture(scope='session')
def testdata_fp():
    return os.path.join(os.path.dirname(__file__), "data")
