"""The complete forward pass of the network."""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from pyrgm.diff.tensor import Tensor
from pyrgm.geom import PointCloud
from pyrgm.net.features import f_theta, local_descriptor
from pyrgm.net.graph import affinity, cross_graph_conv, instance_norm, intra_graph_conv, sinkhorn_with_slack
from pyrgm.net.weights import RgmWeights, block_prefix


@dataclass
class ForwardTrace:
    """Intermediate matrices of each block, recorded for export."""

    edges_x: List[np.ndarray] = field(default_factory=list)
    edges_y: List[np.ndarray] = field(default_factory=list)
    correspondences: List[np.ndarray] = field(default_factory=list)


def node_features(cloud: PointCloud, weights: RgmWeights) -> Tensor:
    """
    Compute the initial node features of a cloud with the shared extractor.

    Arguments:
        cloud: The cloud.
        weights: The weights.

    Returns:
        The `(N, V)` features.
    """
    network = weights.network
    return f_theta(local_descriptor(cloud, network.k), weights, len(network.mlp_widths))


def rgm_forward(
    cloud_x: PointCloud,
    cloud_y: PointCloud,
    weights: RgmWeights,
    trace: Optional[ForwardTrace] = None,
) -> Tensor:
    """
    Compute the soft correspondence matrix between two clouds.

    Both clouds go through the shared extractor, then through `L` blocks of
    edge generation, intra-graph convolution, affinity with Sinkhorn normalization, and cross-graph convolution.
    Each block feeds its updated features to the next one.

    Arguments:
        cloud_x: The source cloud.
        cloud_y: The target cloud.
        weights: The weights.
        trace: When given, receives the adjacency and correspondence matrices of every block.

    Returns:
        The `(N + 1, M + 1)` soft correspondence of the last block (`(N, M)` when slack is disabled).
    """
    network = weights.network
    features_x = node_features(cloud_x, weights)
    features_y = node_features(cloud_y, weights)
    soft = None

    for block in range(network.blocks):
        prefix = block_prefix(block)
        edges_x, edges_y = weights.edge_generator.generate(
            cloud_x,
            cloud_y,
            features_x,
            features_y,
            weights,
            f"{prefix}.edges",
        )
        graph_x = intra_graph_conv(features_x, edges_x, weights, prefix)
        graph_y = intra_graph_conv(features_y, edges_y, weights, prefix)
        scores = instance_norm(
            affinity(graph_x, graph_y, weights[f"{prefix}.affinity"]),
            weights[f"{prefix}.norm.scale"],
            weights[f"{prefix}.norm.shift"],
        )
        soft = sinkhorn_with_slack(
            scores,
            iters=network.sinkhorn_iters,
            slack=network.sinkhorn_slack,
            tolerance=network.sinkhorn_tolerance,
        )
        if trace is not None:
            trace.edges_x.append(edges_x.values.copy())
            trace.edges_y.append(edges_y.values.copy())
            trace.correspondences.append(soft.values.copy())
        if block < network.blocks - 1:
            features_x, features_y = cross_graph_conv(graph_x, graph_y, soft, weights, prefix)
    return soft
