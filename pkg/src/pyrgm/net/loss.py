"""The focal correspondence loss."""

import numpy as np

from pyrgm.diff import ops
from pyrgm.diff.tensor import Tensor
from pyrgm.errors import ParameterError

PROBABILITY_FLOOR = 1e-12
"""Soft correspondences are clamped to `[floor, 1 - floor]` before taking logarithms."""


def focal_loss(soft: Tensor, ground_truth: np.ndarray, alpha: float = 0.5, gamma: float = 0.0) -> Tensor:
    """
    Compute the focal loss of a soft correspondence against the ground truth.

    With `C` the clamped non-slack block and `G` the binary ground truth, the loss is
    `-sum(alpha (1 - C)^gamma G log C + (1 - alpha) C^gamma (1 - G) log(1 - C))`.
    With `alpha = 0.5` and `gamma = 0` it is half the binary cross-entropy.

    Arguments:
        soft: The `(N + 1, M + 1)` or `(N, M)` soft correspondence.
        ground_truth: The binary `(N, M)` ground truth.
        alpha: The positive/negative balance, in `[0, 1]`.
        gamma: The focusing exponent, non-negative.

    Raises:
        ParameterError: When a hyperparameter is out of range or the shapes do not match.

    Returns:
        The scalar loss.
    """
    if not 0 <= alpha <= 1:
        raise ParameterError(f"alpha must be in [0, 1], not {alpha}")
    if gamma < 0:
        raise ParameterError(f"gamma must be >= 0, not {gamma}")
    truth = np.asarray(ground_truth, dtype=np.float64)
    if truth.ndim != 2:
        raise ParameterError(f"focal_loss: ground truth must be a matrix, got shape {truth.shape}")
    rows, columns = truth.shape
    if soft.shape not in {(rows, columns), (rows + 1, columns + 1)}:
        raise ParameterError(f"focal_loss: prediction {soft.shape} does not match ground truth {truth.shape}")

    predicted = ops.clamp(soft[:rows, :columns], PROBABILITY_FLOOR, 1 - PROBABILITY_FLOOR)
    complement = ops.sub(1.0, predicted)
    positive = ops.mul(ops.mul(ops.power(complement, gamma), ops.log(predicted)), alpha * truth)
    negative = ops.mul(ops.mul(ops.power(predicted, gamma), ops.log(complement)), (1 - alpha) * (1 - truth))
    return ops.neg(ops.sum(ops.add(positive, negative)))
