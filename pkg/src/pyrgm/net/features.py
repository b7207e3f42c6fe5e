"""
Object-level local feature extraction.

Each point is described by the pairs it forms with its `K` nearest neighbors.
A shared per-pair MLP processes every pair, each stage is max-pooled over the neighbors,
and the pooled stages are concatenated with a global max over the cloud before a final projection.
"""

from typing import Dict, Mapping, Sequence

import numpy as np

from pyrgm.diff import ops
from pyrgm.diff.tensor import Tensor
from pyrgm.geom import PointCloud, knn_all
from pyrgm.net.layers import Shape, linear, linear_relu, linear_shapes

PREFIX = "f_theta"


def local_descriptor(cloud: PointCloud, k: int) -> np.ndarray:
    """
    Build the neighbor-pair descriptors of every point.

    Arguments:
        cloud: The point cloud.
        k: The number of neighbors, at most `N - 1`.

    Raises:
        ParameterError: When `k >= N`.

    Returns:
        An `(N, K, 6)` array: row `n` of point `i` is `(x_i, x_n)` for its `n`-th nearest neighbor.
    """
    neighbors = knn_all(cloud, k)
    points = cloud.points
    centers = np.broadcast_to(points[:, None, :], (len(points), k, 3))
    return np.concatenate([centers, points[neighbors]], axis=2)


def f_theta_shapes(widths: Sequence[int], feature_dim: int) -> Dict[str, Shape]:
    """
    Return the parameter shapes of the extractor.

    Arguments:
        widths: The widths of the shared MLP stages.
        feature_dim: The output width `V`.

    Returns:
        Shapes by parameter name.
    """
    shapes: Dict[str, Shape] = {}
    fan_in = 6
    for stage, width in enumerate(widths):
        shapes.update(linear_shapes(f"{PREFIX}.mlp{stage}", fan_in, width))
        fan_in = width
    shapes.update(linear_shapes(f"{PREFIX}.proj", sum(widths) + widths[-1], feature_dim))
    return shapes


def f_theta(descriptors: np.ndarray, params: Mapping[str, Tensor], stages: int) -> Tensor:
    """
    Compute node features from neighbor-pair descriptors.

    Arguments:
        descriptors: The `(N, K, 6)` descriptors.
        params: The parameters.
        stages: The number of shared MLP stages.

    Returns:
        The `(N, V)` node features.
    """
    count, k, _ = descriptors.shape
    hidden = Tensor(descriptors.reshape(count * k, 6))
    pooled = []
    for stage in range(stages):
        hidden = linear_relu(hidden, params, f"{PREFIX}.mlp{stage}")
        width = hidden.shape[1]
        pooled.append(ops.max_pool(ops.reshape(hidden, (count, k, width)), axis=1))

    last = pooled[-1]
    global_feature = ops.reshape(ops.max_pool(last, axis=0), (1, last.shape[1]))
    spread = ops.mul(np.ones((count, 1)), global_feature)
    return linear(ops.concat(pooled + [spread], axis=1), params, f"{PREFIX}.proj")
