"""Tests for [the `tensor` module][pyrgm.diff.tensor]."""

import threading

import numpy as np
import pytest

from pyrgm.diff import ops
from pyrgm.diff.tensor import Tape, Tensor, active_tape, backward
from pyrgm.errors import ParameterError


def test_tensor_copies_values():
    """Store a float64 copy of the values."""
    values = np.arange(3)
    tensor = Tensor(values)
    values[0] = 10
    assert tensor.values.dtype == np.float64
    assert tensor.values.tolist() == [0, 1, 2]
    assert tensor.shape == (3,)
    assert tensor.size == 3


def test_square_gradient():
    """Differentiate the sum of squares."""
    weight = Tensor(np.array([[1.0, -2.0], [3.0, 0.5]]), requires_grad=True)
    with Tape() as tape:
        loss = ops.sum(weight * weight)
    backward(loss, tape)
    assert np.array_equal(weight.grad, 2 * weight.values)


def test_gradients_of_reused_tensors_add_up():
    """Sum the gradients of every use of a tensor."""
    x = Tensor([2.0], requires_grad=True)
    with Tape() as tape:
        loss = ops.sum(x * 3 + x * x)
    backward(loss, tape)
    assert x.grad.tolist() == [7.0]


def test_gradients_accumulate_across_calls():
    """Add to existing gradients until they are zeroed."""
    x = Tensor([1.0, 2.0], requires_grad=True)
    for _ in range(2):
        with Tape() as tape:
            loss = ops.sum(x)
        backward(loss, tape)
    assert x.grad.tolist() == [2.0, 2.0]
    x.zero_grad()
    assert x.grad is None


def test_constants_are_not_recorded():
    """Record nothing when no input requires gradients."""
    with Tape() as tape:
        ops.add(Tensor([1.0]), Tensor([2.0]))
    assert len(tape) == 0


def test_constants_get_no_gradient():
    """Leave tensors without `requires_grad` untouched."""
    x = Tensor([1.0], requires_grad=True)
    constant = Tensor([5.0])
    with Tape() as tape:
        loss = ops.sum(x * constant)
    backward(loss, tape)
    assert x.grad.tolist() == [5.0]
    assert constant.grad is None


def test_backward_needs_scalar():
    """Refuse non-scalar losses."""
    x = Tensor([1.0, 2.0], requires_grad=True)
    with Tape() as tape:
        doubled = x * 2
    with pytest.raises(ParameterError):
        backward(doubled, tape)


def test_nested_tapes():
    """Record on the innermost tape only."""
    x = Tensor([1.0], requires_grad=True)
    with Tape() as outer:
        with Tape() as inner:
            assert active_tape() is inner
            ops.neg(x)
        assert active_tape() is outer
    assert active_tape() is None
    assert len(inner) == 1
    assert len(outer) == 0


def test_tapes_are_thread_local():
    """Hide a thread's tape from other threads."""
    seen = []
    with Tape():
        thread = threading.Thread(target=lambda: seen.append(active_tape()))
        thread.start()
        thread.join()
    assert seen == [None]


def test_operators():
    """Map Python operators to the primitives."""
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert (a + 1).values.tolist() == [[2, 3], [4, 5]]
    assert (1 - a).values.tolist() == [[0, -1], [-2, -3]]
    assert (a / 2).values.tolist() == [[0.5, 1], [1.5, 2]]
    assert (-a).values.tolist() == [[-1, -2], [-3, -4]]
    assert (a @ a).values.tolist() == [[7, 10], [15, 22]]
    assert a.T.values.tolist() == [[1, 3], [2, 4]]
    assert a[1].values.tolist() == [3, 4]


def test_detach():
    """Return a copy that does not require gradients."""
    x = Tensor([1.0], requires_grad=True, name="x")
    detached = x.detach()
    assert not detached.requires_grad
    assert detached.name == "x"
    assert detached.values is not x.values
