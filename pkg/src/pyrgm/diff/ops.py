"""
Differentiable primitives.

Each function computes its forward value with numpy and, when a tape is active and at least one input
requires gradients, records a closure computing the input gradients from the output gradient.
Element-wise binary operations follow numpy broadcasting; gradients are summed back to the input shapes.
Reductions always run in numpy's fixed order, so equal inputs give bit-identical outputs.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from pyrgm.diff.tensor import ArrayLike, Backward, Tensor, active_tape
from pyrgm.errors import ParameterError

Operand = Union[Tensor, ArrayLike]

LOG_EXP_MIN = 1e-12
"""Lower clamp bound used before `log` in loss and Sinkhorn paths."""

LOG_EXP_MAX = 1e12
"""Upper clamp bound used in loss and Sinkhorn paths."""


def as_tensor(value: Operand) -> Tensor:
    """
    Wrap a constant into a tensor that does not require gradients.

    Arguments:
        value: A tensor (returned as is), an array or a scalar.

    Returns:
        A tensor.
    """
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _emit(name: str, values: np.ndarray, inputs: Sequence[Tensor], backward_fn: Backward) -> Tensor:
    output = Tensor(values)
    tape = active_tape()
    if tape is not None and any(tensor.requires_grad for tensor in inputs):
        tape.record(name, output, inputs, backward_fn)
    return output


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(first: Tensor, second: Tensor, name: str) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(first.shape, second.shape)
    except ValueError as error:
        raise ParameterError(f"{name}: incompatible shapes {first.shape} and {second.shape}") from error


def add(first: Operand, second: Operand) -> Tensor:
    """
    Element-wise sum.

    Arguments:
        first: A tensor or constant.
        second: A tensor or constant.

    Returns:
        The sum.
    """
    a, b = as_tensor(first), as_tensor(second)
    _broadcast_shape(a, b, "add")
    return _emit(
        "add",
        a.values + b.values,
        (a, b),
        lambda grad: (_unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)),
    )


def sub(first: Operand, second: Operand) -> Tensor:
    """
    Element-wise difference.

    Arguments:
        first: A tensor or constant.
        second: A tensor or constant.

    Returns:
        The difference.
    """
    a, b = as_tensor(first), as_tensor(second)
    _broadcast_shape(a, b, "sub")
    return _emit(
        "sub",
        a.values - b.values,
        (a, b),
        lambda grad: (_unbroadcast(grad, a.shape), _unbroadcast(-grad, b.shape)),
    )


def mul(first: Operand, second: Operand) -> Tensor:
    """
    Element-wise product.

    Arguments:
        first: A tensor or constant.
        second: A tensor or constant.

    Returns:
        The product.
    """
    a, b = as_tensor(first), as_tensor(second)
    _broadcast_shape(a, b, "mul")
    return _emit(
        "mul",
        a.values * b.values,
        (a, b),
        lambda grad: (_unbroadcast(grad * b.values, a.shape), _unbroadcast(grad * a.values, b.shape)),
    )


def div(first: Operand, second: Operand) -> Tensor:
    """
    Element-wise quotient.

    Arguments:
        first: A tensor or constant.
        second: A tensor or constant, nonzero.

    Returns:
        The quotient.
    """
    a, b = as_tensor(first), as_tensor(second)
    _broadcast_shape(a, b, "div")
    quotient = a.values / b.values

    def backward_fn(grad):
        return (
            _unbroadcast(grad / b.values, a.shape),
            _unbroadcast(-grad * quotient / b.values, b.shape),
        )

    return _emit("div", quotient, (a, b), backward_fn)


def neg(tensor: Operand) -> Tensor:
    """
    Negation.

    Arguments:
        tensor: The input.

    Returns:
        The negated tensor.
    """
    a = as_tensor(tensor)
    return _emit("neg", -a.values, (a,), lambda grad: (-grad,))


def matmul(first: Operand, second: Operand) -> Tensor:
    """
    Matrix product of two 2D tensors.

    Arguments:
        first: An `(n, k)` tensor.
        second: A `(k, m)` tensor.

    Raises:
        ParameterError: When the operands are not 2D or inner dimensions differ.

    Returns:
        The `(n, m)` product.
    """
    a, b = as_tensor(first), as_tensor(second)
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ParameterError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return _emit(
        "matmul",
        a.values @ b.values,
        (a, b),
        lambda grad: (grad @ b.values.T, a.values.T @ grad),
    )


def transpose(tensor: Operand) -> Tensor:
    """
    Transpose a 2D tensor.

    Arguments:
        tensor: The input.

    Returns:
        The transposed tensor.
    """
    a = as_tensor(tensor)
    if a.values.ndim != 2:
        raise ParameterError(f"transpose: expected a 2D tensor, got {a.shape}")
    return _emit("transpose", a.values.T.copy(), (a,), lambda grad: (grad.T,))


def reshape(tensor: Operand, shape: Tuple[int, ...]) -> Tensor:
    """
    Reshape a tensor (row-major).

    Arguments:
        tensor: The input.
        shape: The new shape.

    Returns:
        The reshaped tensor.
    """
    a = as_tensor(tensor)
    try:
        values = a.values.reshape(shape)
    except ValueError as error:
        raise ParameterError(f"reshape: cannot reshape {a.shape} into {shape}") from error
    return _emit("reshape", values.copy(), (a,), lambda grad: (grad.reshape(a.shape),))


def index(tensor: Operand, key) -> Tensor:
    """
    Select entries with a numpy index (slices, integer arrays).

    Arguments:
        tensor: The input.
        key: Any numpy index.

    Returns:
        The selected entries.
    """
    a = as_tensor(tensor)

    def backward_fn(grad):
        full = np.zeros_like(a.values)
        np.add.at(full, key, grad)
        return (full,)

    return _emit("index", np.array(a.values[key]), (a,), backward_fn)


def concat(tensors: Sequence[Operand], axis: int = 0) -> Tensor:
    """
    Concatenate tensors along an axis.

    Arguments:
        tensors: The tensors, equal in every dimension but `axis`.
        axis: The axis.

    Raises:
        ParameterError: When shapes are incompatible.

    Returns:
        The concatenation.
    """
    parts = [as_tensor(tensor) for tensor in tensors]
    try:
        values = np.concatenate([part.values for part in parts], axis=axis)
    except ValueError as error:
        shapes = [part.shape for part in parts]
        raise ParameterError(f"concat: incompatible shapes {shapes} along axis {axis}") from error
    bounds = np.cumsum([part.shape[axis] for part in parts])[:-1]
    return _emit("concat", values, parts, lambda grad: np.split(grad, bounds, axis=axis))


def relu(tensor: Operand) -> Tensor:
    """
    Rectified linear unit; the subgradient at zero is zero.

    Arguments:
        tensor: The input.

    Returns:
        `max(x, 0)`.
    """
    a = as_tensor(tensor)
    mask = a.values > 0
    return _emit("relu", np.where(mask, a.values, 0.0), (a,), lambda grad: (grad * mask,))


def exp(tensor: Operand) -> Tensor:
    """
    Element-wise exponential.

    Arguments:
        tensor: The input.

    Returns:
        `exp(x)`.
    """
    a = as_tensor(tensor)
    values = np.exp(a.values)
    return _emit("exp", values, (a,), lambda grad: (grad * values,))


def log(tensor: Operand) -> Tensor:
    """
    Element-wise natural logarithm.

    Arguments:
        tensor: The input, positive.

    Returns:
        `log(x)`.
    """
    a = as_tensor(tensor)
    return _emit("log", np.log(a.values), (a,), lambda grad: (grad / a.values,))


def power(tensor: Operand, exponent: float) -> Tensor:
    """
    Element-wise power with a constant exponent.

    Arguments:
        tensor: The input, positive when the exponent is not an integer.
        exponent: The exponent. Zero gives ones and a zero gradient.

    Returns:
        `x ** exponent`.
    """
    a = as_tensor(tensor)
    if exponent == 0:
        return _emit("power", np.ones_like(a.values), (a,), lambda grad: (np.zeros_like(grad),))
    values = a.values ** exponent
    return _emit("power", values, (a,), lambda grad: (grad * exponent * a.values ** (exponent - 1),))


def clamp(tensor: Operand, low: Optional[float] = None, high: Optional[float] = None) -> Tensor:
    """
    Element-wise clamp; the gradient flows only through entries inside `[low, high]`.

    Arguments:
        tensor: The input.
        low: The lower bound, or `None`.
        high: The upper bound, or `None`.

    Returns:
        The clamped tensor.
    """
    a = as_tensor(tensor)
    values = np.clip(a.values, low, high)
    mask = values == a.values
    return _emit("clamp", values, (a,), lambda grad: (grad * mask,))


def sum(tensor: Operand, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:  # noqa: A001,WPS125
    """
    Sum reduction.

    Arguments:
        tensor: The input.
        axis: The axis to reduce, or `None` for all.
        keepdims: Whether to keep the reduced axis with size one.

    Returns:
        The sums.
    """
    a = as_tensor(tensor)
    values = np.sum(a.values, axis=axis, keepdims=keepdims)

    def backward_fn(grad):
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, a.shape).copy(),)

    return _emit("sum", np.asarray(values, dtype=np.float64), (a,), backward_fn)


def mean(tensor: Operand, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    """
    Mean reduction.

    Arguments:
        tensor: The input.
        axis: The axis to reduce, or `None` for all.
        keepdims: Whether to keep the reduced axis with size one.

    Returns:
        The means.
    """
    a = as_tensor(tensor)
    count = a.size if axis is None else a.shape[axis]
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def var(tensor: Operand, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    """
    Population variance reduction.

    Arguments:
        tensor: The input.
        axis: The axis to reduce, or `None` for all.
        keepdims: Whether to keep the reduced axis with size one.

    Returns:
        The variances.
    """
    a = as_tensor(tensor)
    centered = sub(a, mean(a, axis=axis, keepdims=True))
    return mean(mul(centered, centered), axis=axis, keepdims=keepdims)


def softmax(tensor: Operand) -> Tensor:
    """
    Softmax along the last axis (rows of a matrix).

    Arguments:
        tensor: The input.

    Returns:
        Non-negative rows summing to one.
    """
    a = as_tensor(tensor)
    shifted = a.values - a.values.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    values = exps / exps.sum(axis=-1, keepdims=True)

    def backward_fn(grad):
        return (values * (grad - (grad * values).sum(axis=-1, keepdims=True)),)

    return _emit("softmax", values, (a,), backward_fn)


def max_pool(tensor: Operand, axis: int) -> Tensor:
    """
    Max reduction along an axis; the gradient goes to the first maximal entry.

    Arguments:
        tensor: The input.
        axis: The axis to reduce.

    Returns:
        The maxima, with `axis` removed.
    """
    a = as_tensor(tensor)
    winners = np.expand_dims(np.argmax(a.values, axis=axis), axis)
    values = np.take_along_axis(a.values, winners, axis=axis).squeeze(axis)

    def backward_fn(grad):
        full = np.zeros_like(a.values)
        np.put_along_axis(full, winners, np.expand_dims(grad, axis), axis=axis)
        return (full,)

    return _emit("max_pool", values, (a,), backward_fn)
