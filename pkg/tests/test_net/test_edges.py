"""Tests for [the `edges` module][pyrgm.net.edges]."""

import numpy as np

from pyrgm.diff.tensor import Tensor
from pyrgm.geom import PointCloud
from pyrgm.net.edges import EDGE_GENERATORS, FullEdges, RadiusEdges, TransformerEdges
from pyrgm.net.layers import kaiming_uniform


def test_registry():
    """Register every edge mode."""
    assert set(EDGE_GENERATORS) == {"transformer", "full", "radius"}
    assert EDGE_GENERATORS["transformer"].learnable
    assert not EDGE_GENERATORS["full"].learnable


def test_fixed_graphs_have_no_parameters():
    """Declare no parameters for fixed graphs."""
    assert FullEdges().shapes("block0.edges", 8) == {}
    assert RadiusEdges().shapes("block0.edges", 8) == {}
    assert TransformerEdges(heads=2).shapes("block0.edges", 8)


def test_full_edges(cloud_pair):
    """Connect every node to every node with equal weight."""
    cloud_x, cloud_y = cloud_pair
    edges_x, edges_y = FullEdges().generate(cloud_x, cloud_y, None, None, {}, "block0.edges")
    assert edges_x.shape == (12, 12)
    assert edges_y.shape == (10, 10)
    assert np.allclose(edges_y.values, 0.1)


def test_radius_graph():
    """Connect nodes within the radius, each node to itself included."""
    cloud = PointCloud(np.array([[0.0, 0, 0], [0.1, 0, 0], [1.0, 0, 0]]))
    edges = RadiusEdges(radius=0.2).radius_graph(cloud).values
    assert edges.tolist() == [[0.5, 0.5, 0], [0.5, 0.5, 0], [0, 0, 1]]


def test_transformer_edges(cloud_pair, rng):
    """Give row-stochastic adjacencies from the learned embeddings."""
    cloud_x, cloud_y = cloud_pair
    generator = TransformerEdges(heads=2, layers=1)
    params = {
        name: Tensor(kaiming_uniform(shape, rng) if len(shape) == 2 else np.zeros(shape))
        for name, shape in generator.shapes("block0.edges", 4).items()
    }
    features_x = Tensor(rng.normal(size=(12, 4)))
    features_y = Tensor(rng.normal(size=(10, 4)))
    edges_x, edges_y = generator.generate(cloud_x, cloud_y, features_x, features_y, params, "block0.edges")
    assert edges_x.shape == (12, 12)
    assert edges_y.shape == (10, 10)
    assert np.allclose(edges_x.values.sum(axis=1), 1)
    assert np.allclose(edges_y.values.sum(axis=1), 1)
