"""Tests for [the `ops` module][pyrgm.diff.ops]."""

import numpy as np
import pytest

from pyrgm.diff import ops
from pyrgm.diff.gradcheck import finite_diff_check
from pyrgm.diff.tensor import Tape, Tensor, backward
from pyrgm.errors import ParameterError

TOLERANCE = 1e-4


def _weighted(function, shape, seed=1):
    weights = np.random.default_rng(seed).normal(size=shape)
    return lambda point: ops.sum(ops.mul(function(point), weights))


@pytest.fixture()
def point(rng):
    """
    Return a `(3, 4)` tensor with entries away from zero.

    Arguments:
        rng: The random generator.

    Returns:
        The tensor.
    """
    values = rng.uniform(0.5, 2.0, size=(3, 4)) * rng.choice([-1.0, 1.0], size=(3, 4))
    return Tensor(values)


@pytest.mark.parametrize(
    ("function", "shape"),
    [
        (lambda x: ops.add(x, x), (3, 4)),
        (lambda x: ops.sub(x, 2.0), (3, 4)),
        (lambda x: ops.mul(x, x), (3, 4)),
        (lambda x: ops.div(1.0, x), (3, 4)),
        (lambda x: ops.div(x, ops.sum(ops.mul(x, x))), (3, 4)),
        (lambda x: ops.neg(x), (3, 4)),
        (lambda x: ops.matmul(x, ops.transpose(x)), (3, 3)),
        (lambda x: ops.reshape(x, (4, 3)), (4, 3)),
        (lambda x: ops.index(x, (slice(None), [0, 2, 2])), (3, 3)),
        (lambda x: ops.concat([x, ops.mul(x, x)], axis=1), (3, 8)),
        (lambda x: ops.relu(x), (3, 4)),
        (lambda x: ops.exp(x), (3, 4)),
        (lambda x: ops.log(ops.mul(x, x)), (3, 4)),
        (lambda x: ops.power(ops.mul(x, x), 1.5), (3, 4)),
        (lambda x: ops.clamp(x, -1.5, 1.5), (3, 4)),
        (lambda x: ops.sum(x, axis=0), (4,)),
        (lambda x: ops.mean(x, axis=1, keepdims=True), (3, 1)),
        (lambda x: ops.var(x, axis=1), (3,)),
        (lambda x: ops.softmax(x), (3, 4)),
        (lambda x: ops.max_pool(x, axis=1), (3,)),
    ],
)
def test_gradients_match_finite_differences(function, shape, point):
    """Match central finite differences for every primitive."""
    assert finite_diff_check(_weighted(function, shape), point) < TOLERANCE


def test_broadcast_gradients_are_summed():
    """Sum broadcast gradients back to the input shape."""
    row = Tensor(np.zeros(4), requires_grad=True)
    column = Tensor(np.zeros((3, 1)), requires_grad=True)
    with Tape() as tape:
        loss = ops.sum(ops.add(ops.add(np.ones((3, 4)), row), column))
    backward(loss, tape)
    assert row.grad.tolist() == [3, 3, 3, 3]
    assert column.grad.tolist() == [[4], [4], [4]]


def test_incompatible_shapes():
    """Refuse operands that do not broadcast."""
    with pytest.raises(ParameterError):
        ops.add(Tensor(np.zeros(3)), Tensor(np.zeros(4)))
    with pytest.raises(ParameterError):
        ops.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))
    with pytest.raises(ParameterError):
        ops.reshape(Tensor(np.zeros(3)), (2, 2))
    with pytest.raises(ParameterError):
        ops.concat([Tensor(np.zeros((2, 3))), Tensor(np.zeros((3, 3)))], axis=1)


def test_relu_subgradient_at_zero():
    """Use a zero subgradient at zero."""
    x = Tensor([-1.0, 0.0, 1.0], requires_grad=True)
    with Tape() as tape:
        loss = ops.sum(ops.relu(x))
    backward(loss, tape)
    assert x.grad.tolist() == [0, 0, 1]


def test_softmax_rows_sum_to_one(rng):
    """Give non-negative rows summing to one, even for large inputs."""
    values = ops.softmax(Tensor(rng.normal(size=(5, 6)) * 1000)).values
    assert np.all(values >= 0)
    assert np.allclose(values.sum(axis=1), 1)


def test_max_pool_first_winner():
    """Send the gradient to the first maximal entry."""
    x = Tensor([[1.0, 3.0, 3.0], [2.0, 0.0, 1.0]], requires_grad=True)
    with Tape() as tape:
        pooled = ops.max_pool(x, axis=1)
        loss = ops.sum(pooled)
    backward(loss, tape)
    assert pooled.values.tolist() == [3, 2]
    assert x.grad.tolist() == [[0, 1, 0], [1, 0, 0]]


def test_power_zero():
    """Give ones and no gradient for a zero exponent."""
    x = Tensor([2.0, 3.0], requires_grad=True)
    with Tape() as tape:
        loss = ops.sum(ops.power(x, 0))
    backward(loss, tape)
    assert loss.item() == 2
    assert x.grad.tolist() == [0, 0]


def test_clamp_blocks_gradient_outside():
    """Stop the gradient of clamped entries."""
    x = Tensor([-2.0, 0.5, 2.0], requires_grad=True)
    with Tape() as tape:
        loss = ops.sum(ops.clamp(x, -1, 1))
    backward(loss, tape)
    assert x.grad.tolist() == [0, 1, 0]


def test_variance_is_population_variance():
    """Divide by the number of entries."""
    assert ops.var(Tensor([1.0, 2.0, 3.0, 4.0])).item() == pytest.approx(1.25)


def test_reductions_are_deterministic(rng):
    """Give bit-identical results for equal inputs."""
    values = rng.normal(size=(50, 70))
    assert ops.sum(Tensor(values)).item() == ops.sum(Tensor(values.copy())).item()
