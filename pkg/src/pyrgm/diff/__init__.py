"""
A minimal reverse-mode differentiation engine.

It provides just enough to train the registration network:
dense float64 tensors, a tape, the primitives the network uses, finite-difference checks,
an SGD optimizer and a binary weights container.
"""

from pyrgm.diff.gradcheck import finite_diff_check
from pyrgm.diff.optim import SGD, sgd_step
from pyrgm.diff.tensor import Tape, Tensor, backward

__all__ = ["SGD", "Tape", "Tensor", "backward", "finite_diff_check", "sgd_step"]  # noqa: WPS410
