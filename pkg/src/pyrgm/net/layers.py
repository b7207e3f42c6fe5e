"""Fully-connected layers over named parameters."""

from typing import Dict, Mapping, Tuple

import numpy as np

from pyrgm.diff import ops
from pyrgm.diff.tensor import Tensor

Shape = Tuple[int, ...]


def linear_shapes(prefix: str, fan_in: int, fan_out: int) -> Dict[str, Shape]:
    """
    Return the parameter shapes of a fully-connected layer.

    Arguments:
        prefix: The layer name.
        fan_in: The input width.
        fan_out: The output width.

    Returns:
        `{prefix}.weight` with shape `(fan_in, fan_out)` and `{prefix}.bias` with shape `(fan_out,)`.
    """
    return {f"{prefix}.weight": (fan_in, fan_out), f"{prefix}.bias": (fan_out,)}


def kaiming_uniform(shape: Shape, rng: np.random.Generator) -> np.ndarray:
    """
    Draw a weight matrix uniformly in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.

    Arguments:
        shape: `(fan_in, fan_out)`.
        rng: The random generator.

    Returns:
        The weights.
    """
    bound = 1.0 / np.sqrt(shape[0])
    return rng.uniform(-bound, bound, size=shape)


def linear(inputs: Tensor, params: Mapping[str, Tensor], prefix: str) -> Tensor:
    """
    Apply `inputs @ weight + bias`.

    Arguments:
        inputs: An `(n, fan_in)` tensor.
        params: The parameters.
        prefix: The layer name.

    Returns:
        The `(n, fan_out)` output.
    """
    return ops.add(ops.matmul(inputs, params[f"{prefix}.weight"]), params[f"{prefix}.bias"])


def linear_relu(inputs: Tensor, params: Mapping[str, Tensor], prefix: str) -> Tensor:
    """
    Apply a fully-connected layer followed by a ReLU.

    Arguments:
        inputs: An `(n, fan_in)` tensor.
        params: The parameters.
        prefix: The layer name.

    Returns:
        The `(n, fan_out)` output.
    """
    return ops.relu(linear(inputs, params, prefix))
