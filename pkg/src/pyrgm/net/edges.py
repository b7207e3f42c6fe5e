"""
Edge generators.

An edge generator builds the soft adjacency matrices `(E_X, E_Y)` of both graphs in one block.
The default one learns them with a transformer; the two others build fixed graphs
(fully-connected, or within a radius) to compare against it.
"""

from abc import ABCMeta, abstractmethod
from typing import Dict, Mapping, Tuple, Type

import numpy as np

from pyrgm.diff.tensor import Tensor
from pyrgm.geom import PointCloud, pairwise_squared_distances
from pyrgm.net.graph import soft_edges
from pyrgm.net.layers import Shape
from pyrgm.net.transformer import transformer_embed, transformer_shapes

Edges = Tuple[Tensor, Tensor]


class EdgeGenerator(metaclass=ABCMeta):
    """A helper class to build the soft adjacency matrices of a block."""

    learnable = False
    """Whether the generator has parameters."""

    def __init__(self, heads: int = 4, layers: int = 1, ffn_width: int = 0, radius: float = 0.2) -> None:
        """
        Initialization method.

        Arguments:
            heads: The number of attention heads.
            layers: The number of encoder-decoder layers.
            ffn_width: The feed-forward hidden width; zero means the model width.
            radius: The connection radius of radius graphs.
        """
        self.heads = heads
        self.layers = layers
        self.ffn_width = ffn_width
        self.radius = radius

    def shapes(self, prefix: str, width: int) -> Dict[str, Shape]:
        """
        Return the parameter shapes of the generator.

        Arguments:
            prefix: The generator name.
            width: The node feature width.

        Returns:
            Shapes by parameter name (empty for fixed graphs).
        """
        return {}

    @abstractmethod
    def generate(
        self,
        cloud_x: PointCloud,
        cloud_y: PointCloud,
        features_x: Tensor,
        features_y: Tensor,
        params: Mapping[str, Tensor],
        prefix: str,
    ) -> Edges:
        """
        Build the adjacency matrices of both clouds.

        Arguments:
            cloud_x: The source cloud.
            cloud_y: The target cloud.
            features_x: The `(N, width)` source node features.
            features_y: The `(M, width)` target node features.
            params: The parameters.
            prefix: The generator name.

        Returns:
            `(E_X, E_Y)`, each with rows summing to one.
        """
        raise NotImplementedError


class TransformerEdges(EdgeGenerator):
    """Soft edges from the inner products of transformer embeddings."""

    learnable = True

    def shapes(self, prefix: str, width: int) -> Dict[str, Shape]:  # noqa: D102
        return transformer_shapes(prefix, width, self.layers, self.ffn_width)

    def generate(self, cloud_x, cloud_y, features_x, features_y, params, prefix) -> Edges:  # noqa: D102
        embed_x, embed_y = transformer_embed(features_x, features_y, params, prefix, self.heads, self.layers)
        return soft_edges(embed_x), soft_edges(embed_y)


class FullEdges(EdgeGenerator):
    """Every node connected to every node with equal weight."""

    def generate(self, cloud_x, cloud_y, features_x, features_y, params, prefix) -> Edges:  # noqa: D102
        return _uniform(len(cloud_x)), _uniform(len(cloud_y))


class RadiusEdges(EdgeGenerator):
    """Each node connected, with equal weight, to the nodes within a radius, itself included."""

    def generate(self, cloud_x, cloud_y, features_x, features_y, params, prefix) -> Edges:  # noqa: D102
        return self.radius_graph(cloud_x), self.radius_graph(cloud_y)

    def radius_graph(self, cloud: PointCloud) -> Tensor:
        """
        Build the row-normalized radius graph of a cloud.

        Arguments:
            cloud: The cloud.

        Returns:
            The `(N, N)` adjacency.
        """
        points = cloud.points
        connected = (pairwise_squared_distances(points, points) <= self.radius ** 2).astype(np.float64)
        np.fill_diagonal(connected, 1.0)
        return Tensor(connected / connected.sum(axis=1, keepdims=True))


def _uniform(count: int) -> Tensor:
    return Tensor(np.full((count, count), 1.0 / count))


EDGE_GENERATORS: Dict[str, Type[EdgeGenerator]] = {
    "transformer": TransformerEdges,
    "full": FullEdges,
    "radius": RadiusEdges,
}
"""Edge generators by configuration name."""
