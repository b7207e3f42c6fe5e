"""Tests for [the `synth` module][pyrgm.synth]."""

import numpy as np
import pytest

from pyrgm.errors import DegenerateSampleError, ParameterError
from pyrgm.geom import PointCloud, apply_transform
from pyrgm.synth import (
    MANIFEST_NAME,
    SHAPES,
    TEST_SHAPES,
    TRAIN_SHAPES,
    ProtocolSettings,
    add_gaussian_noise,
    crop_by_plane,
    iter_samples,
    load_manifest,
    make_dataset,
    make_pair,
    protocol_settings,
    rebuild_correspondences,
    sample_seeds,
    sample_shape,
    shape_split,
)


def test_sphere_points_near_unit_sphere(rng):
    """Sample sphere points close to distance 1 from the origin."""
    cloud = sample_shape("sphere", 256, rng)
    assert np.allclose(np.linalg.norm(cloud.points, axis=1), 1, atol=0.05)


@pytest.mark.parametrize("shape_id", sorted(SHAPES))
def test_shapes_are_centered(shape_id, rng):
    """Center the bounding box of every sampled cloud on the origin."""
    points = sample_shape(shape_id, 128, rng).points
    assert np.allclose(points.min(axis=0) + points.max(axis=0), 0, atol=1e-12)


@pytest.mark.parametrize("shape_id", sorted(SHAPES))
def test_shapes_fit_unit_sphere(shape_id, rng):
    """Rescale every family so that the farthest point is at distance 1."""
    cloud = sample_shape(shape_id, 128, rng)
    assert len(cloud) == 128
    assert np.linalg.norm(cloud.points, axis=1).max() == pytest.approx(1)


def test_sample_shape_checks_arguments(rng):
    """Refuse unknown families and tiny clouds."""
    with pytest.raises(ParameterError):
        sample_shape("teapot", 64, rng)
    with pytest.raises(ParameterError):
        sample_shape("sphere", 7, rng)


def test_crop_keeps_requested_fraction(rng):
    """Keep ceil(0.7 * 1024) = 717 points."""
    cloud = sample_shape("sphere", 1024, rng)
    assert len(crop_by_plane(cloud, 0.7, rng)) == 717


def test_crop_along_fixed_normal():
    """Keep the points with the largest projection on the normal, in their original order."""
    points = np.array([[0, 0, z] for z in (0.3, -0.5, 0.9, 0.1, -0.2, 0.6, 0.0, 0.8)], dtype=np.float64)
    cropped = crop_by_plane(PointCloud(points), 0.5, np.random.default_rng(0), normal=[0, 0, 2])
    assert cropped.points[:, 2].tolist() == [0.3, 0.9, 0.6, 0.8]


def test_crop_too_small_fails(rng):
    """Refuse crops keeping fewer than four points."""
    cloud = PointCloud(rng.normal(size=(8, 3)))
    with pytest.raises(DegenerateSampleError):
        crop_by_plane(cloud, 0.25, rng)
    with pytest.raises(ParameterError):
        crop_by_plane(cloud, 0, rng)


def test_noise_is_clipped(rng):
    """Clip every perturbation."""
    cloud = PointCloud(np.zeros((1000, 3)))
    noisy = add_gaussian_noise(cloud, 1.0, 0.05, rng)
    assert np.abs(noisy.points).max() <= 0.05


def test_noise_standard_deviation(rng):
    """Use sigma as the standard deviation of the perturbations."""
    cloud = PointCloud(np.zeros((100000, 3)))
    noisy = add_gaussian_noise(cloud, 0.01, 0.05, rng)
    assert noisy.points.std() == pytest.approx(0.01, rel=0.02)
    assert abs(noisy.points.mean()) < 1e-4


def test_zero_noise_keeps_points(rng):
    """Leave points unchanged with a zero sigma."""
    cloud = PointCloud(rng.normal(size=(5, 3)))
    assert np.array_equal(add_gaussian_noise(cloud, 0, 0.05, rng).points, cloud.points)


def test_clean_pair_is_a_permutation(rng):
    """Give a permutation matrix mapping each transformed source point onto its target point."""
    sample = make_pair("box", protocol_settings("clean"), rng, n_points=64)
    truth = sample.gt_correspondence
    assert truth.shape == (64, 64)
    assert np.array_equal(truth.sum(axis=0), np.ones(64))
    assert np.array_equal(truth.sum(axis=1), np.ones(64))
    rows, columns = np.nonzero(truth)
    moved = apply_transform(sample.gt_transform, sample.source).points
    assert np.allclose(moved[rows], sample.target.points[columns], atol=1e-12)


def test_rebuilt_correspondences_without_noise(rng):
    """Recover the exact permutation when nothing is cropped or perturbed."""
    settings = ProtocolSettings(mode="noise", noise_sigma=0)
    sample = make_pair("sphere", settings, rng, n_points=64)
    truth = sample.gt_correspondence
    assert np.array_equal(truth.sum(axis=1), np.ones(64))
    rows, columns = np.nonzero(truth)
    moved = apply_transform(sample.gt_transform, sample.source).points
    assert np.allclose(moved[rows], sample.target.points[columns], atol=1e-12)


def test_rebuild_respects_distance_bound():
    """Leave points farther than the bound unmatched."""
    source = PointCloud(np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]]))
    target = PointCloud(np.array([[0.05, 0, 0], [1.5, 0, 0]]))
    truth = rebuild_correspondences(source, target, 0.1)
    assert truth.tolist() == [[1, 0], [0, 0], [0, 0]]


def test_rebuild_second_round():
    """Match points left over after the first round."""
    source = PointCloud(np.array([[0.0, 0, 0], [0.05, 0, 0]]))
    target = PointCloud(np.array([[0.02, 0, 0], [0.1, 0, 0]]))
    assert rebuild_correspondences(source, target, 0.1, rounds=1).tolist() == [[1, 0], [0, 0]]
    assert rebuild_correspondences(source, target, 0.1, rounds=2).tolist() == [[1, 0], [0, 1]]


def test_partial_pair_has_outliers(rng):
    """Leave some points without a counterpart when cropping."""
    sample = make_pair("sphere", protocol_settings("partial"), rng, n_points=256)
    truth = sample.gt_correspondence
    assert len(sample.source) == len(sample.target) == 180
    assert truth.sum(axis=1).max() <= 1
    assert truth.sum(axis=0).max() <= 1
    assert 0 < truth.sum() < 180


def test_protocol_presets():
    """Record the partial keep fraction and refuse unknown protocols."""
    assert protocol_settings("partial").keep_fraction == 0.7
    assert protocol_settings("full_range").rot_range_deg == 180
    assert protocol_settings("noise", seed=4).seed == 4
    with pytest.raises(ParameterError):
        protocol_settings("rotated")


def test_settings_validation():
    """Refuse invalid settings."""
    with pytest.raises(ParameterError):
        ProtocolSettings(mode="scrambled")
    with pytest.raises(ParameterError):
        ProtocolSettings(keep_fraction=1.5)


def test_shape_split():
    """Split families between roles only for the unseen protocol."""
    assert shape_split("train") == TRAIN_SHAPES
    assert shape_split("test") == TEST_SHAPES
    assert not set(TRAIN_SHAPES) & set(TEST_SHAPES)
    assert shape_split("test", "clean") == tuple(SHAPES)
    with pytest.raises(ParameterError):
        shape_split("validation")


def test_sample_seeds_are_stable():
    """Derive the same seeds for the same dataset seed, regardless of the count."""
    assert sample_seeds(3, 2) == sample_seeds(3, 4)[:2]
    assert len(set(sample_seeds(3, 10))) == 10


def test_manifest(clean_dataset):
    """Describe every sample in the manifest."""
    manifest = load_manifest(clean_dataset)
    assert manifest["protocol"] == "clean"
    assert manifest["pairs"] == len(manifest["samples"]) == 3
    for entry in manifest["samples"]:
        for name in entry["files"].values():
            assert (clean_dataset / name).exists()


def test_load_samples(clean_dataset):
    """Load back samples with their ground truth."""
    samples = list(iter_samples(load_manifest(clean_dataset / MANIFEST_NAME)))
    assert len(samples) == 3
    for sample in samples:
        assert len(sample.source) == len(sample.target) == 16
        assert sample.gt_correspondence.sum() == 16
        rows, columns = np.nonzero(sample.gt_correspondence)
        moved = apply_transform(sample.gt_transform, sample.source).points
        assert np.allclose(moved[rows], sample.target.points[columns], atol=1e-9)


def test_missing_manifest(tmp_path):
    """Name the missing manifest path."""
    with pytest.raises(OSError, match="manifest"):
        load_manifest(tmp_path)


def test_dataset_is_deterministic(tmp_path):
    """Write identical files for identical seeds."""
    make_dataset("partial_noise", pairs=2, n_points=32, seed=5, out_dir=tmp_path / "first")
    make_dataset("partial_noise", pairs=2, n_points=32, seed=5, out_dir=tmp_path / "second")
    names = sorted(path.name for path in (tmp_path / "first").iterdir())
    assert names == sorted(path.name for path in (tmp_path / "second").iterdir())
    for name in names:
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


def test_unseen_test_role(tmp_path):
    """Draw test samples from the held-out families only."""
    manifest = make_dataset("unseen", pairs=4, n_points=32, seed=1, out_dir=tmp_path, role="test")
    assert {entry["shape_id"] for entry in manifest["samples"]} <= set(TEST_SHAPES)


def test_dataset_needs_pairs(tmp_path):
    """Refuse empty datasets."""
    with pytest.raises(ParameterError):
        make_dataset("clean", pairs=0, n_points=32, seed=0, out_dir=tmp_path)
