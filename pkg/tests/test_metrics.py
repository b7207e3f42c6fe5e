"""Tests for [the `metrics` module][pyrgm.metrics]."""

import numpy as np
import pytest

from pyrgm.config import EvalConfig
from pyrgm.errors import ParameterError
from pyrgm.geom import RigidTransform
from pyrgm.metrics import (
    MetricReport,
    aggregate,
    ccd,
    inlier_ratio_fmr,
    report_to_rows,
    rmse_and_rr,
    score,
    success,
    transform_errors,
)


def test_errors_of_exact_prediction():
    """Give zero errors for the ground truth itself."""
    truth = RigidTransform.from_euler([20, 30, 40], [0.1, 0.2, 0.3])
    assert transform_errors(truth, truth) == pytest.approx((0, 0, 0, 0), abs=1e-5)


def test_errors_of_quarter_turn():
    """Separate the anisotropic and isotropic errors."""
    predicted = RigidTransform.from_euler([90, 0, 0], [0.3, 0, -0.4])
    mae_r, mae_t, mie_r, mie_t = transform_errors(predicted, RigidTransform.identity())
    assert mae_r == pytest.approx(30)
    assert mae_t == pytest.approx(0.7 / 3)
    assert mie_r == pytest.approx(90)
    assert mie_t == pytest.approx(0.5)


def test_ccd_of_identical_clouds(rng):
    """Give zero for identical clouds."""
    points = rng.normal(size=(10, 3))
    assert ccd(points, points) == 0


def test_ccd_is_clipped():
    """Clip every squared distance at d, with raw and per-point variants."""
    first = np.zeros((2, 3))
    second = np.full((3, 3), 10.0)
    assert ccd(first, second, 0.1) == pytest.approx(0.5)
    assert ccd(first, second, 0.1, per_point=True) == pytest.approx(0.2)
    with pytest.raises(ParameterError):
        ccd(first, second, 0)


def test_success_bounds_are_strict():
    """Require both errors strictly below their bounds."""
    assert success(0.99, 0.09)
    assert not success(1.0, 0.0)
    assert not success(0.0, 0.1)


def test_rmse():
    """Measure the residuals of ground-truth pairs under the prediction."""
    source = np.eye(3)
    rmse, hit = rmse_and_rr(RigidTransform.identity(), source, source + [0.1, 0, 0])
    assert rmse == pytest.approx(0.1)
    assert hit
    with pytest.raises(ParameterError):
        rmse_and_rr(RigidTransform.identity(), np.zeros((0, 3)), np.zeros((0, 3)))


def test_inlier_ratio():
    """Count pairs consistent with the ground truth."""
    source = np.zeros((4, 3))
    target = np.array([[0.0, 0, 0], [0.05, 0, 0], [0.5, 0, 0], [1.0, 0, 0]])
    assert inlier_ratio_fmr(source, target, RigidTransform.identity()) == (0.5, True)
    assert inlier_ratio_fmr(np.zeros((0, 3)), np.zeros((0, 3)), RigidTransform.identity()) == (0.0, False)


def test_score_ground_truth(rng):
    """Score the ground truth as a perfect registration."""
    truth = RigidTransform.from_euler([10, 0, 5], [0.1, 0, 0])
    source = rng.normal(size=(6, 3))
    target = truth.apply(source)
    pairs = [(index, index) for index in range(6)]
    report = score(truth, truth, source, target, pairs, pairs, EvalConfig())
    assert report.success
    assert report.rr_hit
    assert report.fmr_hit
    assert report.inlier_ratio == 1
    assert report.correspondences == 6
    assert report.rmse == pytest.approx(0, abs=1e-12)
    assert report.ccd == pytest.approx(0, abs=1e-12)


def test_score_without_pairs(rng):
    """Leave the RMSE unset without ground-truth pairs."""
    source = rng.normal(size=(5, 3))
    report = score(RigidTransform.identity(), RigidTransform.identity(), source, source, [], [])
    assert report.rmse is None
    assert not report.rr_hit
    assert report.inlier_ratio == 0


def test_aggregate_counts_failures_as_misses():
    """Count failed samples as misses and exclude them from means."""
    good = MetricReport(mae_r=0.5, mae_t=0.01, success=True, rmse=0.05, rr_hit=True, degraded=True)
    failed = MetricReport(error="DegenerateGeometryError: fewer than 3 pairs")
    summary = aggregate([good, failed])["summary"]
    assert summary["samples"] == 2
    assert summary["failed"] == 1
    assert summary["degraded"] == 1
    assert summary["recall"] == 50
    assert summary["registration_recall"] == 50
    assert summary["feature_match_recall"] == 0
    assert summary["mae_r"] == 0.5
    assert summary["rmse"] == 0.05


def test_aggregate_empty():
    """Aggregate no records into empty figures."""
    report = aggregate([])
    assert report["summary"]["recall"] == 0
    assert report["summary"]["mae_r"] is None
    assert report["records"] == []
    assert "euler" in report["conventions"]


def test_report_rows():
    """Flatten records with a sample index."""
    rows = report_to_rows(aggregate([MetricReport(), MetricReport(mae_r=1.0)]))
    assert [row["sample"] for row in rows] == [0, 1]
    assert rows[1]["mae_r"] == 1.0
    assert list(rows[0])[0] == "sample"
