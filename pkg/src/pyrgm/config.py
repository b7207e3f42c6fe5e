"""
Configuration loading and validation.

A configuration is a TOML file with the sections `[data]`, `[network]`, `[solver]`, `[loss]`, `[train]` and `[eval]`.
Every key has a default, so an empty file is a valid configuration.
Each field declares its accepted range in its metadata; validation collects one message per violation
instead of stopping at the first one.

```toml
[network]
feature_dim = 256
edge_mode = "radius"

[loss]
preset = "focal-scene"
```
"""

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import toml

from pyrgm.errors import ConfigError
from pyrgm.logger import get_logger

logger = get_logger(__name__)

LOSS_PRESETS = {
    "cross-entropy": (0.5, 0.0),
    "focal-scene": (0.25, 2.0),
}
"""Named `(alpha, gamma)` pairs for the correspondence loss."""

PROTOCOL_NAMES = ("clean", "noise", "partial", "partial_noise", "unseen", "full_range")
EDGE_MODES = ("transformer", "full", "radius")
ESTIMATOR_NAMES = ("svd", "ransac")

INF = float("inf")


def _range(low: float, high: float = INF, kind: type = float, low_open: bool = False) -> Dict[str, Any]:
    return {"range": (low, high), "kind": kind, "low_open": low_open}


def _choices(*names: str) -> Dict[str, Any]:
    return {"choices": names, "kind": str}


@dataclass
class DataConfig:
    """Dataset generation settings."""

    protocol: str = field(default="clean", metadata=_choices(*PROTOCOL_NAMES))
    points: int = field(default=1024, metadata=_range(8, kind=int))
    pairs: int = field(default=100, metadata=_range(1, kind=int))
    seed: int = field(default=0, metadata=_range(0, kind=int))
    role: str = field(default="train", metadata=_choices("train", "test"))


@dataclass
class NetworkConfig:
    """Network hyperparameters."""

    k: int = field(default=20, metadata=_range(1, kind=int))
    feature_dim: int = field(default=1024, metadata=_range(1, kind=int))
    mlp_widths: List[int] = field(default_factory=lambda: [64, 128, 256], metadata={"kind": list})
    graph_dim: int = field(default=1024, metadata=_range(1, kind=int))
    blocks: int = field(default=2, metadata=_range(1, kind=int))
    heads: int = field(default=4, metadata=_range(1, kind=int))
    transformer_layers: int = field(default=1, metadata=_range(1, kind=int))
    transformer_ffn: int = field(default=0, metadata=_range(0, kind=int))
    edge_mode: str = field(default="transformer", metadata=_choices(*EDGE_MODES))
    edge_radius: float = field(default=0.2, metadata=_range(0, low_open=True))
    sinkhorn_iters: int = field(default=20, metadata=_range(1, kind=int))
    sinkhorn_tolerance: float = field(default=1e-9, metadata=_range(0))
    sinkhorn_slack: bool = field(default=True, metadata={"kind": bool})
    seed: int = field(default=0, metadata=_range(0, kind=int))

    @property
    def ffn_width(self) -> int:
        """The transformer feed-forward width; zero in the file means "same as the input width"."""
        return self.transformer_ffn


@dataclass
class SolverConfig:
    """Correspondence solver and estimator settings."""

    tau: float = field(default=0.5, metadata=_range(0, 1))
    estimator: str = field(default="svd", metadata=_choices(*ESTIMATOR_NAMES))
    iterations: int = field(default=2, metadata=_range(1, kind=int))
    ransac_iters: int = field(default=1000, metadata=_range(1, kind=int))
    ransac_threshold: float = field(default=0.05, metadata=_range(0, low_open=True))
    seed: int = field(default=0, metadata=_range(0, kind=int))


@dataclass
class LossConfig:
    """Correspondence loss settings."""

    preset: str = field(default="cross-entropy", metadata=_choices(*LOSS_PRESETS))
    alpha: Optional[float] = field(default=None, metadata=_range(0, 1))
    gamma: Optional[float] = field(default=None, metadata=_range(0))

    def resolved(self) -> "LossConfig":
        """
        Fill `alpha` and `gamma` from the preset when they are not set explicitly.

        Returns:
            A copy with both values set.
        """
        alpha, gamma = LOSS_PRESETS[self.preset]
        return replace(
            self,
            alpha=alpha if self.alpha is None else self.alpha,
            gamma=gamma if self.gamma is None else self.gamma,
        )


@dataclass
class TrainConfig:
    """Training loop settings."""

    dataset: str = field(default="", metadata={"kind": str})
    epochs: int = field(default=20, metadata=_range(1, kind=int))
    lr: float = field(default=1e-3, metadata=_range(0, low_open=True))
    momentum: float = field(default=0.9, metadata=_range(0, 1))
    checkpoint_interval: int = field(default=1, metadata=_range(0, kind=int))
    seed: int = field(default=0, metadata=_range(0, kind=int))


@dataclass
class EvalConfig:
    """Metric thresholds."""

    ccd_d: float = field(default=0.1, metadata=_range(0, low_open=True))
    tau1: float = field(default=0.2, metadata=_range(0, low_open=True))
    tau2: float = field(default=0.1, metadata=_range(0, low_open=True))
    fmr_threshold: float = field(default=0.05, metadata=_range(0, 1))
    recall_rot_deg: float = field(default=1.0, metadata=_range(0, low_open=True))
    recall_trans: float = field(default=0.1, metadata=_range(0, low_open=True))


@dataclass
class RgmConfig:
    """The complete configuration."""

    data: DataConfig = field(default_factory=DataConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)  # noqa: A003,WPS125 (section name)


SECTIONS = {
    "data": DataConfig,
    "network": NetworkConfig,
    "solver": SolverConfig,
    "loss": LossConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}
"""Section classes, by TOML table name."""


def _describe(metadata: Mapping[str, Any]) -> str:
    if "choices" in metadata:
        return "{" + ", ".join(metadata["choices"]) + "}"
    low, high = metadata["range"]
    opening = "(" if metadata.get("low_open") else "["
    closing = ")" if high == INF else "]"
    return f"{opening}{low:g}, {'inf' if high == INF else format(high, 'g')}{closing}"


def _check_value(key: str, value: Any, metadata: Mapping[str, Any]) -> Tuple[Any, Optional[str]]:
    kind = metadata.get("kind", float)
    if value is None:
        return value, None
    if kind is bool:
        if not isinstance(value, bool):
            return value, f"{key}: {value!r} is not a boolean"
        return value, None
    if kind is list:
        if not isinstance(value, list) or not value or not all(isinstance(v, int) and v > 0 for v in value):
            return value, f"{key}: {value!r} is not a non-empty list of positive integers"
        return value, None
    if kind is str:
        if not isinstance(value, str):
            return value, f"{key}: {value!r} is not a string"
        if "choices" in metadata and value not in metadata["choices"]:
            return value, f"{key}: {value!r} not in {_describe(metadata)}"
        return value, None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return value, f"{key}: {value!r} is not a number"
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            return value, f"{key}: {value!r} is not an integer"
        value = int(value)
    else:
        value = float(value)
    low, high = metadata["range"]
    too_low = value <= low if metadata.get("low_open") else value < low
    if too_low or value > high:
        return value, f"{key}: {value!r} not in {_describe(metadata)}"
    return value, None


def config_from_dict(document: Mapping[str, Any]) -> Tuple[RgmConfig, List[str]]:
    """
    Build a configuration from a decoded TOML document.

    Arguments:
        document: Tables by section name.

    Returns:
        The configuration (defaults where values are missing or invalid) and the list of validation errors.
    """
    errors: List[str] = []
    sections: Dict[str, Any] = {}
    for name in document:
        if name not in SECTIONS:
            errors.append(f"{name}: unknown section, expected one of {sorted(SECTIONS)}")

    for name, section_class in SECTIONS.items():
        table = document.get(name, {})
        if not isinstance(table, Mapping):
            errors.append(f"{name}: expected a table")
            table = {}
        known = {section_field.name: section_field for section_field in fields(section_class)}
        values = {}
        for key, value in table.items():
            if key not in known:
                errors.append(f"{name}.{key}: unknown key")
                continue
            checked, error = _check_value(f"{name}.{key}", value, known[key].metadata)
            if error:
                errors.append(error)
            else:
                values[key] = checked
        sections[name] = section_class(**values)

    config = RgmConfig(**sections)
    config.loss = config.loss.resolved()
    errors.extend(_cross_checks(config))
    return config, errors


def _cross_checks(config: RgmConfig) -> List[str]:
    errors = []
    network = config.network
    for key in ("feature_dim", "graph_dim"):
        width = getattr(network, key)
        if width % network.heads:
            errors.append(f"network.{key}: {width} is not a multiple of network.heads = {network.heads}")
    if network.k >= config.data.points:
        errors.append(f"network.k: {network.k} not in [1, data.points - 1 = {config.data.points - 1}]")
    return errors


def validate_config(path: Optional[Union[str, Path]]) -> Tuple[RgmConfig, List[str]]:
    """
    Load and validate a configuration file.

    The effective configuration is echoed to the log.

    Arguments:
        path: The TOML file, or `None` for the defaults.

    Raises:
        OSError: When the file cannot be read.

    Returns:
        The normalized configuration and the list of errors (empty when valid).
    """
    if path is None:
        document: Dict[str, Any] = {}
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as error:
            raise OSError(f"cannot read config file {path}: {error.strerror}") from error
        try:
            document = toml.loads(text)
        except toml.TomlDecodeError as error:
            return RgmConfig(), [f"{path}: invalid TOML: {error}"]
    config, errors = config_from_dict(document)
    logger.info("effective configuration:\n%s", dump_config(config))
    for error in errors:
        logger.warning("config error: %s", error)
    return config, errors


def load_config(path: Optional[Union[str, Path]]) -> RgmConfig:
    """
    Load a configuration file, failing on any validation error.

    Arguments:
        path: The TOML file, or `None` for the defaults.

    Raises:
        ConfigError: When the file is invalid.

    Returns:
        The configuration.
    """
    config, errors = validate_config(path)
    if errors:
        raise ConfigError(errors)
    return config


def apply_overrides(config: RgmConfig, overrides: Mapping[str, Any]) -> RgmConfig:
    """
    Apply dotted-key overrides, such as command line flags, on top of a configuration.

    `None` values are ignored, so unset flags keep the file values.

    Arguments:
        config: The base configuration.
        overrides: Values by dotted key (`"train.lr"`).

    Raises:
        ConfigError: When a key is unknown or a value out of range.

    Returns:
        A new, validated configuration.
    """
    document = config_to_dict(config)
    for dotted, value in overrides.items():
        if value is None:
            continue
        section, _, key = dotted.partition(".")
        document.setdefault(section, {})[key] = value
    new_config, errors = config_from_dict(document)
    if errors:
        raise ConfigError(errors)
    return new_config


def config_to_dict(config: RgmConfig) -> Dict[str, Dict[str, Any]]:
    """
    Convert a configuration into nested dictionaries, dropping unset optional values.

    Arguments:
        config: The configuration.

    Returns:
        Tables by section name.
    """
    return {
        name: {key: value for key, value in table.items() if value is not None}
        for name, table in asdict(config).items()
    }


def dump_config(config: RgmConfig) -> str:
    """
    Serialize a configuration as TOML.

    Arguments:
        config: The configuration.

    Returns:
        The TOML text.
    """
    return toml.dumps(config_to_dict(config))


def override_keys(pairs: Sequence[Tuple[str, Any]]) -> Dict[str, Any]:
    """
    Build an override mapping from `(dotted_key, value)` pairs.

    Arguments:
        pairs: The pairs.

    Returns:
        The mapping, with `None` values removed.
    """
    return {key: value for key, value in pairs if value is not None}
