"""
The parameter set of the network.

Parameters are named tensors. Each of the `L` blocks has its own, independent parameters under a
`block{b}.` prefix; the local feature extractor is shared by both clouds and lives under `f_theta.`.
"""

from collections import OrderedDict
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Union

import numpy as np

from pyrgm.config import NetworkConfig
from pyrgm.diff.container import load_weights, save_weights
from pyrgm.diff.tensor import Tensor
from pyrgm.errors import FormatError
from pyrgm.net.edges import EDGE_GENERATORS, EdgeGenerator
from pyrgm.net.features import f_theta_shapes
from pyrgm.net.layers import Shape, kaiming_uniform, linear_shapes

AFFINITY_NOISE = 0.01
"""Standard deviation of the noise added to the identity when initializing `W`."""


def block_prefix(block: int) -> str:
    """
    Return the parameter prefix of a block.

    Arguments:
        block: The block index.

    Returns:
        The prefix.
    """
    return f"block{block}"


def make_edge_generator(network: NetworkConfig) -> EdgeGenerator:
    """
    Instantiate the configured edge generator.

    Arguments:
        network: The network configuration.

    Returns:
        The generator.
    """
    return EDGE_GENERATORS[network.edge_mode](
        heads=network.heads,
        layers=network.transformer_layers,
        ffn_width=network.ffn_width,
        radius=network.edge_radius,
    )


def parameter_shapes(network: NetworkConfig) -> Dict[str, Shape]:
    """
    Return the shape of every parameter, in storage order.

    Arguments:
        network: The network configuration.

    Returns:
        Shapes by parameter name.
    """
    shapes: Dict[str, Shape] = OrderedDict(f_theta_shapes(network.mlp_widths, network.feature_dim))
    generator = make_edge_generator(network)
    width = network.feature_dim
    side = network.graph_dim
    for block in range(network.blocks):
        prefix = block_prefix(block)
        shapes.update(generator.shapes(f"{prefix}.edges", width))
        shapes.update(linear_shapes(f"{prefix}.adj", width, side))
        shapes.update(linear_shapes(f"{prefix}.self", width, side))
        shapes[f"{prefix}.affinity"] = (side, side)
        shapes[f"{prefix}.norm.scale"] = (1,)
        shapes[f"{prefix}.norm.shift"] = (1,)
        if block < network.blocks - 1:
            shapes.update(linear_shapes(f"{prefix}.cross", 2 * side, side))
        width = side
    return shapes


def _initial_value(name: str, shape: Shape, rng: np.random.Generator) -> np.ndarray:
    if name.endswith(".affinity"):
        return np.eye(shape[0]) + rng.normal(0, AFFINITY_NOISE, size=shape)
    if name.endswith(".norm.scale"):
        return np.ones(shape)
    if name.endswith(".weight"):
        return kaiming_uniform(shape, rng)
    return np.zeros(shape)


class RgmWeights(Mapping):
    """The named parameters of the network, with the configuration they were built for."""

    def __init__(self, network: NetworkConfig, params: Mapping[str, Tensor]) -> None:
        """
        Initialization method.

        Arguments:
            network: The network configuration.
            params: The parameters by name, in storage order.
        """
        self.network = network
        """The network configuration."""
        self.params: Dict[str, Tensor] = OrderedDict(params)
        """The parameters by name."""
        self.edge_generator = make_edge_generator(network)
        """The edge generator used by every block."""

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def __repr__(self) -> str:
        return f"<RgmWeights({len(self)} parameters, {self.network.blocks} blocks)>"

    @classmethod
    def initialize(cls, network: NetworkConfig, seed: int = 0) -> "RgmWeights":
        """
        Create freshly initialized weights.

        Linear weights are uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero,
        affinity matrices the identity plus Gaussian noise, instance-norm scales one and shifts zero.

        Arguments:
            network: The network configuration.
            seed: The seed of the initialization.

        Returns:
            The weights.
        """
        rng = np.random.default_rng(seed)
        params = OrderedDict(
            (name, Tensor(_initial_value(name, shape, rng), requires_grad=True, name=name))
            for name, shape in parameter_shapes(network).items()
        )
        return cls(network, params)

    @classmethod
    def from_arrays(cls, network: NetworkConfig, arrays: Mapping[str, np.ndarray], source: str = "") -> "RgmWeights":
        """
        Build weights from stored arrays, checking them against the configuration.

        Arguments:
            network: The network configuration.
            arrays: Arrays by parameter name.
            source: A label for error messages.

        Raises:
            FormatError: When a parameter is missing, unexpected or has the wrong shape.

        Returns:
            The weights.
        """
        expected = parameter_shapes(network)
        label = f"{source}: " if source else ""
        missing = [name for name in expected if name not in arrays]
        unexpected = [name for name in arrays if name not in expected]
        if missing or unexpected:
            raise FormatError(f"{label}parameters do not match the network: missing {missing}, unexpected {unexpected}")
        params = OrderedDict()
        for name, shape in expected.items():
            values = np.asarray(arrays[name], dtype=np.float64)
            if values.shape != shape:
                raise FormatError(f"{label}parameter {name} has shape {values.shape}, expected {shape}")
            params[name] = Tensor(values, requires_grad=True, name=name)
        return cls(network, params)

    def parameters(self) -> List[Tensor]:
        """
        Return the parameter tensors, in storage order.

        Returns:
            The tensors.
        """
        return list(self.params.values())

    def to_arrays(self) -> Dict[str, np.ndarray]:
        """
        Copy the parameter values.

        Returns:
            Arrays by name, in storage order.
        """
        return OrderedDict((name, tensor.values.copy()) for name, tensor in self.params.items())

    def save(self, path: Union[str, Path]) -> None:
        """
        Write the weights container and its manifest.

        Arguments:
            path: The container path.
        """
        save_weights(path, self.to_arrays())

    @classmethod
    def load(cls, path: Union[str, Path], network: NetworkConfig) -> "RgmWeights":
        """
        Read a weights container.

        Arguments:
            path: The container path.
            network: The configuration the weights were trained with.

        Returns:
            The weights.
        """
        return cls.from_arrays(network, load_weights(path), str(path))
