"""
The tensor and tape classes of the reverse-mode differentiation engine.

A [`Tape`][pyrgm.diff.tensor.Tape] is activated with a `with` statement.
While it is active, every primitive from [`pyrgm.diff.ops`][pyrgm.diff.ops] that receives at least one tensor
requiring gradients appends a record to it. [`backward`][pyrgm.diff.tensor.backward] then walks the records
in reverse order and accumulates gradients into the leaf tensors.

```python
weight = Tensor(np.ones((2, 2)), requires_grad=True)
with Tape() as tape:
    loss = ops.sum(ops.mul(weight, weight))
backward(loss, tape)
weight.grad  # 2 * weight.values
```
"""

import threading
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from pyrgm.errors import ParameterError

Backward = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
ArrayLike = Union[np.ndarray, float, int, Sequence]

_local = threading.local()


class Tensor:
    """A dense array of 64-bit floats, with an optional gradient buffer."""

    def __init__(self, values: ArrayLike, requires_grad: bool = False, name: str = "") -> None:
        """
        Initialization method.

        Arguments:
            values: The values, converted to a float64 array (copied).
            requires_grad: Whether gradients must be computed for this tensor.
            name: An optional name, used by parameter sets and error messages.
        """
        self.values: np.ndarray = np.array(values, dtype=np.float64)
        """The values."""
        self.grad: Optional[np.ndarray] = None
        """The accumulated gradient, same shape as the values, or `None`."""
        self.requires_grad = requires_grad
        """Whether operations on this tensor are recorded."""
        self.name = name
        """An optional name."""
        self.is_leaf = True
        """False for tensors produced by a recorded operation."""

    def __repr__(self) -> str:
        label = f"{self.name}, " if self.name else ""
        return f"<Tensor({label}shape={self.shape}, requires_grad={self.requires_grad})>"

    @property
    def shape(self) -> Tuple[int, ...]:
        """The shape."""
        return self.values.shape

    @property
    def size(self) -> int:
        """The number of scalars."""
        return self.values.size

    @property
    def T(self) -> "Tensor":  # noqa: N802 (mirrors numpy)
        """The transposed tensor (2D only)."""
        from pyrgm.diff import ops  # noqa: WPS433 (ops depends on this module)

        return ops.transpose(self)

    def item(self) -> float:
        """
        Return the value of a single-element tensor.

        Returns:
            The scalar value.
        """
        return float(self.values.reshape(-1)[0])

    def zero_grad(self) -> None:
        """Drop the accumulated gradient."""
        self.grad = None

    def detach(self) -> "Tensor":
        """
        Return a copy that does not require gradients.

        Returns:
            The detached tensor.
        """
        return Tensor(self.values, name=self.name)

    def __add__(self, other):
        from pyrgm.diff import ops  # noqa: WPS433

        return ops.add(self, other)

    def __radd__(self, other):
        from pyrgm.diff import ops  # noqa: WPS433

        return ops.add(other, self)

    def __sub__(self, other):
        from pyrgm.diff import ops  # noqa: WPS433

        return ops.sub(self, other)

    def __rsub__(self, other):
        from pyrgm.diff import ops  # noqa: WPS433

        return ops.sub(other, self)

    def __mul__(self, other):
        from pyrgm.diff import ops  # noqa: WPS433

        return ops.mul(self, other)

    def __rmul__(self, other):
        from pyrgm.diff import ops  # noqa: WPS433

        return ops.mul(other, self)

    def __truediv__(self, other):
        from pyrgm.diff import ops  # noqa: WPS433

        return ops.div(self, other)

    def __matmul__(self, other):
        from pyrgm.diff import ops  # noqa: WPS433

        return ops.matmul(self, other)

    def __neg__(self):
        from pyrgm.diff import ops  # noqa: WPS433

        return ops.neg(self)

    def __getitem__(self, key):
        from pyrgm.diff import ops  # noqa: WPS433

        return ops.index(self, key)


class Record:
    """One recorded primitive: its output, its inputs, and the function mapping output gradients to input gradients."""

    def __init__(self, name: str, output: Tensor, inputs: Sequence[Tensor], backward_fn: Backward) -> None:
        """
        Initialization method.

        Arguments:
            name: The primitive name.
            output: The produced tensor.
            inputs: The input tensors, in the order `backward_fn` returns their gradients.
            backward_fn: Maps the output gradient to one gradient (or `None`) per input.
        """
        self.name = name
        self.output = output
        self.inputs = list(inputs)
        self.backward_fn = backward_fn

    def __repr__(self) -> str:
        return f"<Record({self.name})>"


class Tape:
    """
    An ordered record of primitive operations.

    Records are appended in execution order, which is a topological order:
    every record's inputs were produced before it. A tape is owned by one thread at a time.
    """

    def __init__(self) -> None:
        """Initialization method."""
        self.records: List[Record] = []
        """The recorded operations, in execution order."""

    def __len__(self) -> int:
        return len(self.records)

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc_info) -> None:
        _stack().pop()

    def record(self, name: str, output: Tensor, inputs: Sequence[Tensor], backward_fn: Backward) -> None:
        """
        Append a record.

        Arguments:
            name: The primitive name.
            output: The produced tensor.
            inputs: The inputs.
            backward_fn: The gradient function.
        """
        output.requires_grad = True
        output.is_leaf = False
        self.records.append(Record(name, output, inputs, backward_fn))


def _stack() -> List[Tape]:
    if not hasattr(_local, "tapes"):
        _local.tapes = []
    return _local.tapes


def active_tape() -> Optional[Tape]:
    """
    Return the innermost active tape of the current thread.

    Returns:
        The tape, or `None` when no tape is active.
    """
    stack = _stack()
    return stack[-1] if stack else None


def backward(loss: Tensor, tape: Tape) -> Dict[int, np.ndarray]:
    """
    Back-propagate from a scalar loss through a tape.

    Gradients of leaf tensors requiring them are added to their `grad` buffers;
    a tensor used several times receives the sum of the gradients of each use.

    Arguments:
        loss: A single-element tensor produced on `tape`.
        tape: The tape.

    Raises:
        ParameterError: When the loss holds more than one element.

    Returns:
        The gradients of every tensor reached, keyed by `id(tensor)`.
    """
    if loss.size != 1:
        raise ParameterError(f"backward needs a scalar loss, got shape {loss.shape}")

    gradients: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
    leaves: Dict[int, Tensor] = {}
    if loss.is_leaf and loss.requires_grad:
        leaves[id(loss)] = loss

    for record in reversed(tape.records):
        output_grad = gradients.pop(id(record.output), None)
        if output_grad is None:
            continue
        input_grads = record.backward_fn(output_grad)
        for tensor, grad in zip(record.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            if key in gradients:
                gradients[key] = gradients[key] + grad
            else:
                gradients[key] = grad
            if tensor.is_leaf:
                leaves[key] = tensor

    for key, leaf in leaves.items():
        grad = gradients[key].reshape(leaf.shape)
        leaf.grad = grad.copy() if leaf.grad is None else leaf.grad + grad
    return gradients
