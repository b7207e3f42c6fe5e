"""The registration network: feature extraction, edge generation, graph matching and loss."""

from pyrgm.net.loss import focal_loss
from pyrgm.net.model import ForwardTrace, rgm_forward
from pyrgm.net.weights import RgmWeights

__all__ = ["ForwardTrace", "RgmWeights", "focal_loss", "rgm_forward"]  # noqa: WPS410
