"""Configuration for the pytest test suite."""

import numpy as np
import pytest

from pyrgm.config import NetworkConfig
from pyrgm.geom import PointCloud
from pyrgm.net.weights import RgmWeights
from pyrgm.synth import make_dataset


def pytest_addoption(parser):
    """
    Add the option running the slow end-to-end experiments.

    Arguments:
        parser: The pytest option parser.
    """
    parser.addoption("--slow", action="store_true", default=False, help="Run the slow end-to-end experiments.")


def pytest_collection_modifyitems(config, items):
    """
    Skip slow tests unless `--slow` is given.

    Arguments:
        config: The pytest configuration.
        items: The collected tests.
    """
    if config.getoption("--slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture()
def rng():
    """
    Return a seeded random generator.

    Returns:
        A generator seeded with 0.
    """
    return np.random.default_rng(0)


@pytest.fixture()
def tiny_network():
    """
    Return a network configuration small enough for finite differences.

    Returns:
        The configuration.
    """
    return NetworkConfig(k=4, feature_dim=8, mlp_widths=[4, 8], graph_dim=8, blocks=2, heads=2)


@pytest.fixture()
def tiny_weights(tiny_network):
    """
    Return weights for the tiny network.

    Arguments:
        tiny_network: The tiny configuration.

    Returns:
        Weights initialized with seed 0.
    """
    return RgmWeights.initialize(tiny_network, seed=0)


@pytest.fixture()
def cloud_pair(rng):
    """
    Return two small random clouds of different sizes.

    Arguments:
        rng: The random generator.

    Returns:
        A 12-point and a 10-point cloud.
    """
    return PointCloud(rng.uniform(-1, 1, size=(12, 3))), PointCloud(rng.uniform(-1, 1, size=(10, 3)))


@pytest.fixture(scope="session")
def clean_dataset(tmp_path_factory):
    """
    Generate a small clean dataset once per session.

    Arguments:
        tmp_path_factory: Pytest fixture to create temporary directories.

    Returns:
        The dataset directory.
    """
    out_dir = tmp_path_factory.mktemp("clean")
    make_dataset("clean", pairs=3, n_points=16, seed=3, out_dir=out_dir)
    return out_dir
