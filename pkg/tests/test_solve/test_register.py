"""Tests for [the `register` module][pyrgm.solve.register]."""

from dataclasses import replace

import numpy as np

from pyrgm.geom import RigidTransform, compose
from pyrgm.net.weights import RgmWeights
from pyrgm.solve.estimators import RansacEstimator, SvdEstimator
from pyrgm.solve.register import make_estimator, register


def test_make_estimator():
    """Build estimators by name."""
    assert isinstance(make_estimator("svd"), SvdEstimator)
    ransac = make_estimator("ransac", iters=10, threshold=0.1, seed=2)
    assert isinstance(ransac, RansacEstimator)
    assert (ransac.iters, ransac.threshold) == (10, 0.1)


def test_increments_compose_to_result(cloud_pair, tiny_weights):
    """Compose the increments into the final transform."""
    cloud_x, cloud_y = cloud_pair
    result = register(cloud_x, cloud_y, tiny_weights, iterations=2, tau=0)
    assert result.iterations_run == 2
    assert len(result.increments) == 2
    assert not result.degraded
    expected = compose(result.increments[1], result.increments[0])
    assert np.allclose(result.transform.rotation, expected.rotation, atol=1e-12)
    assert np.allclose(result.transform.translation, expected.translation, atol=1e-12)


def test_last_correspondences(cloud_pair, tiny_weights):
    """Keep the one-to-one correspondences and soft matrix of the last iteration."""
    cloud_x, cloud_y = cloud_pair
    result = register(cloud_x, cloud_y, tiny_weights, iterations=1, tau=0)
    assert (result.correspondences.rows, result.correspondences.columns) == (12, 10)
    assert len(result.correspondences) == 10
    assert result.soft.shape == (13, 11)


def test_degenerate_estimation_is_flagged(cloud_pair, tiny_weights):
    """Keep the identity and flag the result when no pair is selected."""
    cloud_x, cloud_y = cloud_pair
    result = register(cloud_x, cloud_y, tiny_weights, iterations=2, tau=1.0)
    assert result.degraded
    assert result.iterations_run == 0
    assert result.increments == []
    assert np.array_equal(result.transform.rotation, RigidTransform.identity().rotation)


def test_ransac_registration(cloud_pair, tiny_weights):
    """Record the estimator and seed."""
    cloud_x, cloud_y = cloud_pair
    result = register(cloud_x, cloud_y, tiny_weights, estimator="ransac", iterations=1, tau=0, ransac_iters=20, seed=5)
    assert result.estimator == "ransac"
    assert result.seed == 5


def test_registration_without_slack(cloud_pair, tiny_network):
    """Register with a network without slack row and column."""
    cloud_x, cloud_y = cloud_pair
    weights = RgmWeights.initialize(replace(tiny_network, sinkhorn_slack=False))
    result = register(cloud_x, cloud_y, weights, iterations=1, tau=0)
    assert result.soft.shape == (12, 10)
    assert len(result.correspondences) == 10


def test_registration_is_deterministic(cloud_pair, tiny_weights):
    """Give identical results for identical inputs."""
    cloud_x, cloud_y = cloud_pair
    first = register(cloud_x, cloud_y, tiny_weights, tau=0)
    second = register(cloud_x, cloud_y, tiny_weights, tau=0)
    assert np.array_equal(first.transform.rotation, second.transform.rotation)
    assert first.correspondences.pairs == second.correspondences.pairs
