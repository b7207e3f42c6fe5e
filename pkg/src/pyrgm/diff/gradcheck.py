"""Finite-difference verification of analytic gradients."""

from typing import Callable, Iterable, Optional

import numpy as np

from pyrgm.diff.tensor import Tape, Tensor, backward

DENOMINATOR_FLOOR = 1e-8
"""Added to the analytic gradient magnitude in the relative error denominator."""


def finite_diff_check(
    func: Callable[[Tensor], Tensor],
    point: Tensor,
    eps: float = 1e-5,
    exclude: Optional[np.ndarray] = None,
    coordinates: Optional[Iterable[int]] = None,
) -> float:
    """
    Compare the analytic gradient of a scalar function with central finite differences.

    The error at one coordinate is `|analytic - (f(x + eps e) - f(x - eps e)) / 2 eps| / (|analytic| + 1e-8)`.

    `func` may be a closure over other tensors (parameters): `point` may be one of them,
    its values are perturbed in place and restored afterwards.

    Arguments:
        func: Maps `point` to a single-element tensor.
        point: The tensor to differentiate with respect to.
        eps: The finite-difference step.
        exclude: A boolean mask with the shape of `point`; masked coordinates are not compared
            (non-differentiable points such as ReLU inputs at exactly zero).
        coordinates: Flat indices to compare; all coordinates when omitted.

    Returns:
        The maximum relative error over the compared coordinates (0 when none is compared).
    """
    saved_grad, saved_flag = point.grad, point.requires_grad
    point.grad = None
    point.requires_grad = True
    with Tape() as tape:
        value = func(point)
    backward(value, tape)
    analytic = np.zeros(point.shape) if point.grad is None else point.grad.reshape(-1)
    analytic = analytic.reshape(-1)
    point.grad, point.requires_grad = saved_grad, saved_flag

    flat = point.values.reshape(-1)
    skip = np.zeros(flat.shape, dtype=bool) if exclude is None else np.asarray(exclude, dtype=bool).reshape(-1)
    selected = range(flat.size) if coordinates is None else coordinates

    worst = 0.0
    for coordinate in selected:
        if skip[coordinate]:
            continue
        original = flat[coordinate]
        flat[coordinate] = original + eps
        upper = func(point).item()
        flat[coordinate] = original - eps
        lower = func(point).item()
        flat[coordinate] = original
        numeric = (upper - lower) / (2 * eps)
        error = abs(analytic[coordinate] - numeric) / (abs(analytic[coordinate]) + DENOMINATOR_FLOOR)
        worst = max(worst, error)
    return worst
