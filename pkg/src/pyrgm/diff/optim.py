"""Stochastic gradient descent with momentum."""

from typing import Dict, List, Sequence

import numpy as np

from pyrgm.diff.tensor import Tensor
from pyrgm.errors import ParameterError


def sgd_step(params: Sequence[Tensor], lr: float, momentum: float, velocities: Dict[int, np.ndarray]) -> None:
    """
    Apply one SGD update in place, then zero the gradients.

    For each parameter: `v = momentum * v + grad`, then `w = w - lr * v`.
    Parameters without gradient are left untouched.

    Arguments:
        params: The parameters.
        lr: The learning rate.
        momentum: The momentum factor.
        velocities: Velocity buffers keyed by `id(param)`, updated in place.
    """
    for param in params:
        if param.grad is None:
            continue
        key = id(param)
        velocity = velocities.get(key)
        velocity = param.grad.copy() if velocity is None else momentum * velocity + param.grad
        velocities[key] = velocity
        param.values -= lr * velocity
        param.grad = None


class SGD:
    """An optimizer owning its parameters' velocity buffers."""

    def __init__(self, params: Sequence[Tensor], lr: float, momentum: float = 0.0) -> None:
        """
        Initialization method.

        Arguments:
            params: The parameters to update.
            lr: The learning rate, non-negative.
            momentum: The momentum factor, in `[0, 1)`.

        Raises:
            ParameterError: When a hyperparameter is out of range.
        """
        if lr < 0:
            raise ParameterError(f"lr must be >= 0, not {lr}")
        if not 0 <= momentum < 1:
            raise ParameterError(f"momentum must be in [0, 1), not {momentum}")
        self.params: List[Tensor] = list(params)
        self.lr = lr
        self.momentum = momentum
        self.velocities: Dict[int, np.ndarray] = {}

    def step(self) -> None:
        """Update every parameter and zero the gradients."""
        sgd_step(self.params, self.lr, self.momentum, self.velocities)

    def zero_grad(self) -> None:
        """Drop every accumulated gradient."""
        for param in self.params:
            param.zero_grad()
