"""
This module defines functions to serialize objects.

These functions simply take objects as parameters and return dictionaries that can be dumped by `json.dumps`.
"""

from dataclasses import asdict
from typing import Any, Dict, Optional

from pyrgm.formats import transform_to_line
from pyrgm.geom import RigidTransform, euler_angles
from pyrgm.metrics import MetricReport
from pyrgm.solve.register import RegistrationResult
from pyrgm.synth import ProtocolSettings


def serialize_transform(transform: RigidTransform) -> Dict[str, Any]:
    """
    Serialize a rigid transform.

    Arguments:
        transform: The transform to serialize.

    Returns:
        A JSON-serializable dictionary with the homogeneous matrix, the 12-number line and the Euler angles.
    """
    return {
        "matrix": transform.as_matrix().tolist(),
        "line": transform_to_line(transform),
        "euler_zyx_deg": euler_angles(transform.rotation).tolist(),
        "translation": transform.translation.tolist(),
    }


def serialize_settings(settings: ProtocolSettings) -> Dict[str, Any]:
    """
    Serialize protocol settings.

    Arguments:
        settings: The settings to serialize.

    Returns:
        A JSON-serializable dictionary.
    """
    return asdict(settings)


def serialize_result(result: RegistrationResult, with_pairs: bool = False) -> Dict[str, Any]:
    """
    Serialize a registration result.

    Arguments:
        result: The result to serialize.
        with_pairs: Whether to include the list of matched pairs.

    Returns:
        A JSON-serializable dictionary.
    """
    serialized = {
        "transform": serialize_transform(result.transform),
        "increments": [serialize_transform(increment) for increment in result.increments],
        "iterations_run": result.iterations_run,
        "correspondences": len(result.correspondences),
        "estimator": result.estimator,
        "seed": result.seed,
        "degraded": result.degraded,
    }
    if with_pairs:
        serialized["pairs"] = [list(pair) for pair in result.correspondences.pairs]
    return serialized


def serialize_report(report: MetricReport) -> Dict[str, Any]:
    """
    Serialize the metrics of one sample.

    Arguments:
        report: The report to serialize.

    Returns:
        A JSON-serializable dictionary.
    """
    return asdict(report)


def serialize_epoch(epoch: int, mean_loss: float, wall_time: float, checkpoint: Optional[str] = None) -> Dict[str, Any]:
    """
    Serialize one training log record.

    Arguments:
        epoch: The epoch number, starting at 1.
        mean_loss: The mean sample loss of the epoch.
        wall_time: The epoch duration, in seconds.
        checkpoint: The checkpoint written at the end of the epoch, if any.

    Returns:
        A JSON-serializable dictionary.
    """
    record: Dict[str, Any] = {"epoch": epoch, "mean_loss": mean_loss, "wall_time": wall_time}
    if checkpoint:
        record["checkpoint"] = checkpoint
    return record
