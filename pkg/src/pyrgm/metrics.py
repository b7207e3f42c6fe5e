"""
Evaluation metrics.

Conventions:

- rotation errors are in degrees, translation errors in cloud units;
- isotropic errors (MIE) are the geodesic angle of `R_gt^T R_pre` and the Euclidean norm of `t_pre - t_gt`;
- anisotropic errors (MAE) are the means of the absolute intrinsic Z-Y-X Euler angles of `R_gt^T R_pre`
  and of the absolute translation components;
- the clip chamfer distance is reported both as the raw two-sided sum and per point.
"""

from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from pyrgm.errors import ParameterError
from pyrgm.geom import RigidTransform, euler_angles, pairwise_squared_distances

CONVENTIONS = {
    "euler": "intrinsic ZYX, degrees",
    "mie": "geodesic rotation angle (degrees) / euclidean translation norm",
    "mae": "mean absolute ZYX Euler angle (degrees) / mean absolute translation component",
    "ccd": "raw two-sided sum of squared distances clipped at d; per-point variant divides each side by its size",
}
"""Printed in every aggregated report."""

RECALL_ROTATION_DEG = 1.0
RECALL_TRANSLATION = 0.1
CCD_CLIP = 0.1
TAU1 = 0.2
TAU2 = 0.1
FMR_THRESHOLD = 0.05


@dataclass
class MetricReport:
    """The metrics of one registered sample."""

    mae_r: float = 0.0
    mae_t: float = 0.0
    mie_r: float = 0.0
    mie_t: float = 0.0
    ccd: float = 0.0
    ccd_per_point: float = 0.0
    success: bool = False
    rmse: Optional[float] = None
    rr_hit: bool = False
    inlier_ratio: float = 0.0
    fmr_hit: bool = False
    correspondences: int = 0
    degraded: bool = False
    error: Optional[str] = None


def transform_errors(predicted: RigidTransform, truth: RigidTransform) -> Tuple[float, float, float, float]:
    """
    Compute the anisotropic and isotropic errors of a predicted transform.

    Arguments:
        predicted: The predicted transform.
        truth: The ground-truth transform.

    Returns:
        `(mae_r, mae_t, mie_r, mie_t)`.
    """
    relative = truth.rotation.T @ predicted.rotation
    cosine = np.clip((np.trace(relative) - 1) / 2, -1.0, 1.0)
    mie_r = float(np.degrees(np.arccos(cosine)))
    delta = predicted.translation - truth.translation
    mae_r = float(np.mean(np.abs(euler_angles(relative))))
    return mae_r, float(np.mean(np.abs(delta))), mie_r, float(np.linalg.norm(delta))


def ccd_terms(first: np.ndarray, second: np.ndarray, d: float = CCD_CLIP) -> Tuple[np.ndarray, np.ndarray]:
    """
    Compute the clipped nearest squared distances of both clouds.

    Arguments:
        first: The `(N, 3)` first cloud.
        second: The `(M, 3)` second cloud.
        d: The clipping value, positive.

    Raises:
        ParameterError: When `d <= 0`.

    Returns:
        The `N` clipped distances of the first cloud, and the `M` of the second.
    """
    if d <= 0:
        raise ParameterError(f"d must be > 0, not {d}")
    distances = pairwise_squared_distances(np.asarray(first), np.asarray(second))
    return np.minimum(distances.min(axis=1), d), np.minimum(distances.min(axis=0), d)


def ccd(transformed: np.ndarray, target: np.ndarray, d: float = CCD_CLIP, per_point: bool = False) -> float:
    """
    Compute the clip chamfer distance between the transformed source and the target.

    Arguments:
        transformed: The `(N, 3)` transformed source points.
        target: The `(M, 3)` target points.
        d: The clipping value on squared distances.
        per_point: Divide each side's sum by its number of points.

    Returns:
        The distance.
    """
    forward, backward = ccd_terms(transformed, target, d)
    if per_point:
        return float(forward.mean() + backward.mean())
    return float(forward.sum() + backward.sum())


def success(
    mae_r: float,
    mae_t: float,
    rotation_deg: float = RECALL_ROTATION_DEG,
    translation: float = RECALL_TRANSLATION,
) -> bool:
    """
    Tell whether a registration counts for the recall.

    Arguments:
        mae_r: The anisotropic rotation error, in degrees.
        mae_t: The anisotropic translation error.
        rotation_deg: The strict rotation bound.
        translation: The strict translation bound.

    Returns:
        Whether both errors are below their bounds.
    """
    return mae_r < rotation_deg and mae_t < translation


def rmse_and_rr(
    predicted: RigidTransform,
    source: np.ndarray,
    target: np.ndarray,
    tau1: float = TAU1,
) -> Tuple[float, bool]:
    """
    Compute the RMSE of the ground-truth pairs under the predicted transform.

    Arguments:
        predicted: The predicted transform.
        source: The `(K, 3)` source points of the ground-truth pairs.
        target: The `(K, 3)` matched target points.
        tau1: The registration recall threshold.

    Raises:
        ParameterError: When there is no pair.

    Returns:
        The RMSE, and whether it is below `tau1`.
    """
    source = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    if len(source) == 0:
        raise ParameterError("rmse needs at least one ground-truth pair")
    residual = predicted.apply(source) - np.asarray(target, dtype=np.float64).reshape(-1, 3)
    rmse = float(np.sqrt(np.mean(np.sum(residual * residual, axis=1))))
    return rmse, rmse < tau1


def inlier_ratio_fmr(
    source: np.ndarray,
    target: np.ndarray,
    truth: RigidTransform,
    tau2: float = TAU2,
    fmr_threshold: float = FMR_THRESHOLD,
) -> Tuple[float, bool]:
    """
    Compute the fraction of predicted pairs consistent with the ground-truth transform.

    Arguments:
        source: The `(K, 3)` source points of the predicted pairs.
        target: The `(K, 3)` matched target points.
        truth: The ground-truth transform.
        tau2: The residual threshold.
        fmr_threshold: The inlier ratio above which the sample counts for the feature match recall.

    Returns:
        The inlier ratio (0 without pairs), and whether it exceeds `fmr_threshold`.
    """
    source = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    if len(source) == 0:
        return 0.0, False
    residual = np.linalg.norm(truth.apply(source) - np.asarray(target, dtype=np.float64).reshape(-1, 3), axis=1)
    ratio = float(np.mean(residual < tau2))
    return ratio, ratio > fmr_threshold


def score(
    predicted: RigidTransform,
    truth: RigidTransform,
    source: np.ndarray,
    target: np.ndarray,
    gt_pairs: Sequence[Tuple[int, int]],
    predicted_pairs: Sequence[Tuple[int, int]],
    eval_config: Any = None,
) -> MetricReport:
    """
    Compute every metric of one sample.

    Arguments:
        predicted: The predicted transform.
        truth: The ground-truth transform.
        source: The `(N, 3)` source points.
        target: The `(M, 3)` target points.
        gt_pairs: The ground-truth `(i, j)` pairs.
        predicted_pairs: The predicted `(i, j)` pairs.
        eval_config: An [`EvalConfig`][pyrgm.config.EvalConfig]; defaults when `None`.

    Returns:
        The report.
    """
    ccd_d = getattr(eval_config, "ccd_d", CCD_CLIP)
    mae_r, mae_t, mie_r, mie_t = transform_errors(predicted, truth)
    transformed = predicted.apply(source)
    report = MetricReport(
        mae_r=mae_r,
        mae_t=mae_t,
        mie_r=mie_r,
        mie_t=mie_t,
        ccd=ccd(transformed, target, ccd_d),
        ccd_per_point=ccd(transformed, target, ccd_d, per_point=True),
        success=success(
            mae_r,
            mae_t,
            getattr(eval_config, "recall_rot_deg", RECALL_ROTATION_DEG),
            getattr(eval_config, "recall_trans", RECALL_TRANSLATION),
        ),
        correspondences=len(predicted_pairs),
    )
    if gt_pairs:
        rows, columns = np.array(gt_pairs).T
        tau1 = getattr(eval_config, "tau1", TAU1)
        report.rmse, report.rr_hit = rmse_and_rr(predicted, source[rows], target[columns], tau1)
    if predicted_pairs:
        rows, columns = np.array(predicted_pairs).T
        report.inlier_ratio, report.fmr_hit = inlier_ratio_fmr(
            source[rows],
            target[columns],
            truth,
            getattr(eval_config, "tau2", TAU2),
            getattr(eval_config, "fmr_threshold", FMR_THRESHOLD),
        )
    return report


def _mean(values: List[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def _percent(flags: List[bool], total: int) -> float:
    return 100.0 * sum(flags) / total if total else 0.0


def aggregate(records: Sequence[MetricReport]) -> Dict[str, Any]:
    """
    Aggregate per-sample reports into dataset-level figures.

    Failed samples count as misses in every percentage and are excluded from the means.

    Arguments:
        records: The per-sample reports.

    Returns:
        The aggregated report, with the per-sample records under `records`.
    """
    scored = [record for record in records if record.error is None]
    total = len(records)
    summary: Dict[str, Any] = {
        field_name: _mean([getattr(record, field_name) for record in scored])
        for field_name in ("mae_r", "mae_t", "mie_r", "mie_t", "ccd", "ccd_per_point", "inlier_ratio")
    }
    summary["rmse"] = _mean([record.rmse for record in scored if record.rmse is not None])
    summary.update(
        {
            "samples": total,
            "failed": total - len(scored),
            "degraded": sum(record.degraded for record in records),
            "recall": _percent([record.success for record in scored], total),
            "registration_recall": _percent([record.rr_hit for record in scored], total),
            "feature_match_recall": _percent([record.fmr_hit for record in scored], total),
        },
    )
    return {"summary": summary, "conventions": dict(CONVENTIONS), "records": [asdict(record) for record in records]}


def report_to_rows(report: Dict[str, Any]) -> List[Dict[str, Any]]:
    """
    Flatten the per-sample records of an aggregated report, for CSV export.

    Arguments:
        report: The aggregated report.

    Returns:
        One dictionary per sample, with a `sample` index column first.
    """
    return [{"sample": index, **record} for index, record in enumerate(report["records"])]
