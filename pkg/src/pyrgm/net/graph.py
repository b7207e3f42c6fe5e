"""
Graph operations: soft edges, intra-graph and cross-graph convolutions, and the affinity module.

The affinity module turns the node features of two graphs into a soft correspondence matrix:
bilinear affinity, instance normalization, exponentiation, then Sinkhorn normalization
with a slack row and column absorbing the mass of unmatched points.
"""

from typing import Mapping, Optional, Tuple

import numpy as np

from pyrgm.diff import ops
from pyrgm.diff.tensor import Tensor
from pyrgm.errors import NumericError, ParameterError
from pyrgm.logger import get_logger
from pyrgm.net.layers import linear, linear_relu

logger = get_logger(__name__)

INSTANCE_NORM_EPS = 1e-5
"""Added to the variance under the square root of the instance normalization."""

SINKHORN_ITERS = 20
"""Default number of Sinkhorn half-steps."""

SINKHORN_TOLERANCE = 1e-9
"""Default early-exit threshold on the maximal non-slack row-sum deviation."""


def soft_edges(embedding: Tensor) -> Tensor:
    """
    Build the soft adjacency matrix of a cloud from its embeddings.

    Arguments:
        embedding: The `(N, width)` embeddings.

    Returns:
        `E = softmax(T @ T.T)` row-wise: `(N, N)`, every row summing to one.
    """
    return ops.softmax(ops.matmul(embedding, ops.transpose(embedding)))


def column_normalize(edges: Tensor) -> Tensor:
    """
    L1-normalize the columns of an adjacency matrix.

    Arguments:
        edges: The `(N, N)` non-negative adjacency.

    Returns:
        The normalized matrix; columns summing to zero stay zero.
    """
    sums = ops.sum(edges, axis=0, keepdims=True)
    guard = (sums.values == 0).astype(np.float64)
    return ops.div(edges, ops.add(sums, guard))


def intra_graph_conv(features: Tensor, edges: Tensor, params: Mapping[str, Tensor], prefix: str) -> Tensor:
    """
    Aggregate node features along the soft edges of their own graph.

    Node `i` receives `sum_j E'[i, j] f_adj(F_j) + f_self(F_i)`, with `E'` the column-normalized edges.

    Arguments:
        features: The `(N, width)` node features.
        edges: The `(N, N)` soft adjacency of the same cloud.
        params: The parameters.
        prefix: The block name.

    Raises:
        ParameterError: When the adjacency does not match the node count.

    Returns:
        The `(N, Q)` updated features.
    """
    count = features.shape[0]
    if edges.shape != (count, count):
        raise ParameterError(f"intra_graph_conv: edges {edges.shape} do not match {count} nodes")
    messages = linear_relu(features, params, f"{prefix}.adj")
    own = linear_relu(features, params, f"{prefix}.self")
    return ops.add(ops.matmul(column_normalize(edges), messages), own)


def affinity(features_x: Tensor, features_y: Tensor, weight: Tensor) -> Tensor:
    """
    Compute the bilinear affinity `A[i, j] = Fx_i^T W Fy_j`.

    Arguments:
        features_x: The `(N, Q)` source features.
        features_y: The `(M, Q)` target features.
        weight: The `(Q, Q)` affinity weights.

    Raises:
        ParameterError: When the widths do not match `W`.

    Returns:
        The `(N, M)` affinity.
    """
    side = weight.shape[0]
    if weight.shape != (side, side) or features_x.shape[1] != side or features_y.shape[1] != side:
        raise ParameterError(
            f"affinity: features {features_x.shape} and {features_y.shape} do not match W {weight.shape}",
        )
    return ops.matmul(ops.matmul(features_x, weight), ops.transpose(features_y))


def instance_norm(
    matrix: Tensor,
    scale: Optional[Tensor] = None,
    shift: Optional[Tensor] = None,
    eps: float = INSTANCE_NORM_EPS,
) -> Tensor:
    """
    Normalize a matrix to zero mean and unit variance over all its entries, then apply an affine map.

    Arguments:
        matrix: The input, with at least two entries.
        scale: The learnable scale, or `None` for 1.
        shift: The learnable shift, or `None` for 0.
        eps: Added to the variance.

    Raises:
        ParameterError: When the matrix has fewer than two entries.

    Returns:
        `(A - mean) / sqrt(var + eps) * scale + shift`.
    """
    if matrix.size < 2:
        raise ParameterError(f"instance_norm: needs at least 2 entries, got shape {matrix.shape}")
    centered = ops.sub(matrix, ops.mean(matrix))
    normalized = ops.div(centered, ops.power(ops.add(ops.var(matrix), eps), 0.5))
    if scale is not None:
        normalized = ops.mul(normalized, scale)
    if shift is not None:
        normalized = ops.add(normalized, shift)
    return normalized


def _normalize_rows(matrix: Tensor, rows: int) -> Tensor:
    block = matrix[:rows, :]
    normalized = ops.div(block, ops.sum(block, axis=1, keepdims=True))
    if rows == matrix.shape[0]:
        return normalized
    return ops.concat([normalized, matrix[rows:, :]], axis=0)


def _normalize_columns(matrix: Tensor, columns: int) -> Tensor:
    block = matrix[:, :columns]
    normalized = ops.div(block, ops.sum(block, axis=0, keepdims=True))
    if columns == matrix.shape[1]:
        return normalized
    return ops.concat([normalized, matrix[:, columns:]], axis=1)


def sinkhorn_with_slack(
    scores: Tensor,
    iters: int = SINKHORN_ITERS,
    slack: bool = True,
    tolerance: float = SINKHORN_TOLERANCE,
) -> Tensor:
    """
    Turn normalized affinities into a soft correspondence matrix.

    Entries are exponentiated; with `slack`, a row and a column of ones are appended.
    The `iters` half-steps alternate, starting with the rows: a row step normalizes the non-slack rows,
    a column step the non-slack columns, with denominators including the slack entries. The slack row and column
    are never normalized themselves. After a column step, iteration stops early when every non-slack row
    sums to one within `tolerance`.

    Arguments:
        scores: The `(N, M)` instance-normalized affinities.
        iters: The number of half-steps, at least 1.
        slack: Whether to append the slack row and column.
        tolerance: The early-exit threshold; zero disables the early exit.

    Raises:
        ParameterError: When `iters < 1`.
        NumericError: When the scores are not finite.

    Returns:
        The `(N + 1, M + 1)` matrix (or `(N, M)` without slack).
    """
    if iters < 1:
        raise ParameterError(f"sinkhorn: iters must be >= 1, not {iters}")
    if not np.all(np.isfinite(scores.values)):
        raise NumericError("sinkhorn: non-finite affinities", {"scores": scores.values.tolist()})

    rows, columns = scores.shape
    matrix = ops.exp(ops.clamp(scores, high=np.log(ops.LOG_EXP_MAX)))
    if slack:
        matrix = ops.concat([matrix, np.ones((rows, 1))], axis=1)
        matrix = ops.concat([matrix, np.ones((1, columns + 1))], axis=0)

    for step in range(iters):
        if step % 2 == 0:
            matrix = _normalize_rows(matrix, rows)
            continue
        matrix = _normalize_columns(matrix, columns)
        deviation = np.max(np.abs(matrix.values[:rows, :].sum(axis=1) - 1))
        if tolerance > 0 and deviation < tolerance:
            logger.debug("sinkhorn converged after %d half-steps", step + 1)
            break
    return matrix


def cross_graph_conv(
    features_x: Tensor,
    features_y: Tensor,
    soft: Tensor,
    params: Mapping[str, Tensor],
    prefix: str,
) -> Tuple[Tensor, Tensor]:
    """
    Update the node features of both graphs with features aggregated from the other graph.

    Source node `i` becomes `f_cross([Fx_i, sum_j C[i, j] Fy_j])`, and symmetrically for target nodes
    with the transposed matrix. Only the non-slack block of `C` is used; `f_cross` is shared.

    Arguments:
        features_x: The `(N, Q)` source features.
        features_y: The `(M, Q)` target features.
        soft: The soft correspondence, `(N + 1, M + 1)` or `(N, M)`.
        params: The parameters.
        prefix: The block name.

    Raises:
        ParameterError: When the matrix does not match the node counts.

    Returns:
        The updated `(F'_X, F'_Y)`.
    """
    rows, columns = features_x.shape[0], features_y.shape[0]
    if soft.shape not in {(rows, columns), (rows + 1, columns + 1)}:
        raise ParameterError(f"cross_graph_conv: matrix {soft.shape} does not match {rows}x{columns} nodes")
    block = soft[:rows, :columns]
    gathered_x = ops.matmul(block, features_y)
    gathered_y = ops.matmul(ops.transpose(block), features_x)
    updated_x = linear(ops.concat([features_x, gathered_x], axis=1), params, f"{prefix}.cross")
    updated_y = linear(ops.concat([features_y, gathered_y], axis=1), params, f"{prefix}.cross")
    return updated_x, updated_y
