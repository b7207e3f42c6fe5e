"""
Synthetic registration problems.

Samples are drawn from procedural surface families instead of CAD models. Every sampled cloud is translated
so that its bounding box is centered on the origin, then rescaled so that its farthest point lies on the unit sphere.

A sample is produced by a protocol:

- `clean`: the target is the transformed, shuffled source; correspondences are the shuffle permutation.
- `noise`: both clouds get independent clipped Gaussian noise; correspondences are rebuilt from distances.
- `partial` / `partial_noise`: both clouds are independently cropped by a random plane, then noised.
- `unseen`: like `partial`, with shape families split between training and test sets.
- `full_range`: like `partial`, with rotations up to 180 degrees.
"""

import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from pyrgm.errors import DegenerateSampleError, ParameterError
from pyrgm.formats import (
    matrix_to_pairs,
    pairs_to_matrix,
    read_cloud,
    read_json,
    read_pairs,
    read_transform,
    write_cloud,
    write_json,
    write_pairs,
    write_transform,
)
from pyrgm.geom import PointCloud, RigidTransform, apply_transform, pairwise_squared_distances, random_transform
from pyrgm.logger import get_logger

logger = get_logger(__name__)

MODES = ("clean", "noise", "partial", "partial_noise")
MIN_CROPPED_POINTS = 4
MANIFEST_NAME = "manifest.json"
GENERATOR_VERSION = 2
"""Bumped whenever a change alters the samples generated from a given seed."""

PathLike = Union[str, Path]
ShapeSampler = Callable[[int, np.random.Generator], np.ndarray]


def _sphere(count: int, rng: np.random.Generator) -> np.ndarray:
    directions = rng.normal(size=(count, 3))
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def _box_surface(count: int, rng: np.random.Generator, sizes: Sequence[float], center: Sequence[float]) -> np.ndarray:
    half = np.asarray(sizes, dtype=np.float64) / 2
    # faces perpendicular to each axis, weighted by area
    areas = np.array([half[1] * half[2], half[0] * half[2], half[0] * half[1]])
    axes = rng.choice(3, size=count, p=areas / areas.sum())
    points = rng.uniform(-half, half, size=(count, 3))
    signs = rng.choice([-1.0, 1.0], size=count)
    points[np.arange(count), axes] = signs * half[axes]
    return points + np.asarray(center, dtype=np.float64)


def _box(count: int, rng: np.random.Generator) -> np.ndarray:
    return _box_surface(count, rng, (1.0, 0.8, 0.6), (0, 0, 0))


def _cylinder(count: int, rng: np.random.Generator) -> np.ndarray:
    radius, half_height = 0.5, 0.7
    lateral = 2 * np.pi * radius * 2 * half_height
    cap = np.pi * radius ** 2
    on_side = rng.uniform(size=count) < lateral / (lateral + 2 * cap)
    angles = rng.uniform(0, 2 * np.pi, size=count)
    radii = np.where(on_side, radius, radius * np.sqrt(rng.uniform(size=count)))
    heights = np.where(on_side, rng.uniform(-half_height, half_height, size=count), half_height)
    heights = np.where(on_side, heights, heights * rng.choice([-1.0, 1.0], size=count))
    return np.stack([radii * np.cos(angles), radii * np.sin(angles), heights], axis=1)


def _torus(count: int, rng: np.random.Generator) -> np.ndarray:
    major, minor = 0.7, 0.25
    around = rng.uniform(0, 2 * np.pi, size=count)
    tube = rng.uniform(0, 2 * np.pi, size=count)
    ring = major + minor * np.cos(tube)
    return np.stack([ring * np.cos(around), ring * np.sin(around), minor * np.sin(tube)], axis=1)


def _two_box(count: int, rng: np.random.Generator) -> np.ndarray:
    first = rng.uniform(size=count) < 0.5
    left = _box_surface(count, rng, (0.7, 0.6, 0.6), (-0.35, 0, 0))
    right = _box_surface(count, rng, (0.7, 0.4, 0.8), (0.35, 0, 0))
    return np.where(first[:, None], left, right)


def _helix(count: int, rng: np.random.Generator) -> np.ndarray:
    turns, pitch, tube = 2.0, 0.12, 0.08
    angles = rng.uniform(-turns * np.pi, turns * np.pi, size=count)
    axis = np.stack([np.cos(angles), np.sin(angles), pitch * angles], axis=1)
    offsets = rng.normal(size=(count, 3))
    offsets *= tube / np.linalg.norm(offsets, axis=1, keepdims=True)
    return axis + offsets


SHAPES: Dict[str, ShapeSampler] = {
    "sphere": _sphere,
    "box": _box,
    "cylinder": _cylinder,
    "torus": _torus,
    "two_box": _two_box,
    "helix": _helix,
}
"""Procedural surface samplers by family name."""

TRAIN_SHAPES = ("sphere", "box", "cylinder")
TEST_SHAPES = ("torus", "two_box", "helix")


@dataclass(frozen=True)
class ProtocolSettings:
    """The parameters of a generation protocol."""

    mode: str = "clean"
    rot_range_deg: float = 45.0
    trans_range: float = 0.5
    keep_fraction: float = 1.0
    noise_sigma: float = 0.0
    noise_clip: float = 0.05
    max_corr_dist: float = 0.1
    seed: int = 0
    protocol: str = "clean"

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, not {self.mode!r}")
        if not 0 < self.keep_fraction <= 1:
            raise ParameterError(f"keep_fraction must be in (0, 1], not {self.keep_fraction}")
        if self.noise_sigma < 0:
            raise ParameterError(f"noise_sigma must be >= 0, not {self.noise_sigma}")
        if self.noise_clip < 0:
            raise ParameterError(f"noise_clip must be >= 0, not {self.noise_clip}")
        if self.max_corr_dist <= 0:
            raise ParameterError(f"max_corr_dist must be > 0, not {self.max_corr_dist}")


_NOISY = {"noise_sigma": 0.01, "noise_clip": 0.05}
_PARTIAL = {**_NOISY, "keep_fraction": 0.7}

PROTOCOLS: Dict[str, ProtocolSettings] = {
    "clean": ProtocolSettings(mode="clean", protocol="clean"),
    "noise": ProtocolSettings(mode="noise", protocol="noise", **_NOISY),
    "partial": ProtocolSettings(mode="partial", protocol="partial", **_PARTIAL),
    "partial_noise": ProtocolSettings(mode="partial_noise", protocol="partial_noise", **_PARTIAL),
    "unseen": ProtocolSettings(mode="partial", protocol="unseen", **_PARTIAL),
    "full_range": ProtocolSettings(mode="partial", protocol="full_range", rot_range_deg=180.0, **_PARTIAL),
}
"""Named protocol presets."""


@dataclass
class RegistrationSample:
    """One registration problem with its ground truth."""

    source: PointCloud
    target: PointCloud
    gt_transform: RigidTransform
    gt_correspondence: np.ndarray
    settings: ProtocolSettings
    shape_id: str = ""


def protocol_settings(name: str, seed: int = 0) -> ProtocolSettings:
    """
    Return the settings of a named protocol.

    Arguments:
        name: The protocol name.
        seed: The seed to record in the settings.

    Raises:
        ParameterError: When the protocol is unknown.

    Returns:
        The settings.
    """
    try:
        return replace(PROTOCOLS[name], seed=seed)
    except KeyError as error:
        raise ParameterError(f"unknown protocol {name!r}, expected one of {sorted(PROTOCOLS)}") from error


def shape_split(role: str, protocol: str = "unseen") -> Tuple[str, ...]:
    """
    Return the shape families used for a dataset role.

    Only the `unseen` protocol splits families; other protocols use all of them for both roles.

    Arguments:
        role: `"train"` or `"test"`.
        protocol: The protocol name.

    Raises:
        ParameterError: When the role is unknown.

    Returns:
        The family names.
    """
    if role not in {"train", "test"}:
        raise ParameterError(f"role must be 'train' or 'test', not {role!r}")
    if protocol != "unseen":
        return tuple(SHAPES)
    return TRAIN_SHAPES if role == "train" else TEST_SHAPES


def sample_shape(shape_id: str, n_points: int, rng: np.random.Generator) -> PointCloud:
    """
    Sample points on a procedural surface, centered and rescaled into the unit sphere.

    The bounding box of the sampled points is centered on the origin before rescaling.

    Arguments:
        shape_id: The family name.
        n_points: The number of points, at least 8.
        rng: The random generator.

    Raises:
        ParameterError: When the family is unknown or `n_points < 8`.

    Returns:
        The cloud, with its bounding box centered on the origin and its farthest point at distance 1.
    """
    if shape_id not in SHAPES:
        raise ParameterError(f"unknown shape {shape_id!r}, expected one of {sorted(SHAPES)}")
    if n_points < 8:
        raise ParameterError(f"n_points must be >= 8, not {n_points}")
    points = SHAPES[shape_id](n_points, rng)
    points = points - (points.min(axis=0) + points.max(axis=0)) / 2
    return PointCloud(points / np.linalg.norm(points, axis=1).max())


def crop_indices(cloud: PointCloud, keep_fraction: float, normal: np.ndarray) -> np.ndarray:
    """
    Select the points kept by a plane crop.

    Arguments:
        cloud: The cloud.
        keep_fraction: The fraction of points to keep, in `(0, 1]`.
        normal: The unit normal of the plane.

    Returns:
        The indices of the `ceil(keep_fraction * N)` points with the largest signed distance along the normal,
        in their original order.
    """
    count = math.ceil(round(keep_fraction * len(cloud), 9))
    order = np.argsort(-(cloud.points @ normal), kind="stable")
    return np.sort(order[:count])


def crop_by_plane(
    cloud: PointCloud,
    keep_fraction: float,
    rng: np.random.Generator,
    normal: Optional[np.ndarray] = None,
) -> PointCloud:
    """
    Keep the part of a cloud on one side of a random plane.

    The plane normal is uniformly random; the plane is moved along it until the requested fraction remains.

    Arguments:
        cloud: The cloud.
        keep_fraction: The fraction of points to keep, in `(0, 1]`.
        rng: The random generator.
        normal: A fixed normal instead of a random one.

    Raises:
        ParameterError: When the fraction is out of range.
        DegenerateSampleError: When fewer than 4 points would remain.

    Returns:
        The cropped cloud, points in their original order.
    """
    if not 0 < keep_fraction <= 1:
        raise ParameterError(f"keep_fraction must be in (0, 1], not {keep_fraction}")
    if normal is None:
        normal = rng.normal(size=3)
    normal = np.asarray(normal, dtype=np.float64)
    normal = normal / np.linalg.norm(normal)
    indices = crop_indices(cloud, keep_fraction, normal)
    if len(indices) < MIN_CROPPED_POINTS:
        raise DegenerateSampleError(f"crop keeps {len(indices)} points, fewer than {MIN_CROPPED_POINTS}")
    return cloud.take(indices)


def add_gaussian_noise(cloud: PointCloud, sigma: float, clip: float, rng: np.random.Generator) -> PointCloud:
    """
    Perturb every coordinate with clipped Gaussian noise.

    Arguments:
        cloud: The cloud.
        sigma: The standard deviation, non-negative.
        clip: The clipping bound, non-negative.
        rng: The random generator.

    Raises:
        ParameterError: When a parameter is negative.

    Returns:
        The noisy cloud.
    """
    if sigma < 0 or clip < 0:
        raise ParameterError(f"sigma and clip must be >= 0, not {sigma} and {clip}")
    noise = np.clip(rng.normal(0, sigma, size=cloud.points.shape), -clip, clip)
    return PointCloud(cloud.points + noise)


def _mutual_nearest(
    distances: np.ndarray,
    rows: np.ndarray,
    columns: np.ndarray,
    limit: float,
) -> List[Tuple[int, int]]:
    block = distances[np.ix_(rows, columns)]
    nearest_column = np.argmin(block, axis=1)
    nearest_row = np.argmin(block, axis=0)
    pairs = []
    for local_row, local_column in enumerate(nearest_column):
        if nearest_row[local_column] == local_row and block[local_row, local_column] < limit:
            pairs.append((int(rows[local_row]), int(columns[local_column])))
    return pairs


def rebuild_correspondences(aligned: PointCloud, target: PointCloud, max_dist: float, rounds: int = 2) -> np.ndarray:
    """
    Build ground-truth correspondences from distances.

    A round matches every pair of mutual nearest neighbors closer than `max_dist`, then removes the matched points;
    the next round repeats the search on the remaining points. Ties go to the lower index.

    Arguments:
        aligned: The source cloud under the ground-truth transform.
        target: The target cloud.
        max_dist: The strict distance bound.
        rounds: The number of rounds.

    Returns:
        The binary `(N, M)` correspondence matrix.
    """
    distances = pairwise_squared_distances(aligned.points, target.points)
    matrix = np.zeros(distances.shape)
    free_rows = np.ones(distances.shape[0], dtype=bool)
    free_columns = np.ones(distances.shape[1], dtype=bool)
    for _ in range(rounds):
        rows, columns = np.flatnonzero(free_rows), np.flatnonzero(free_columns)
        if rows.size == 0 or columns.size == 0:
            break
        for i, j in _mutual_nearest(distances, rows, columns, max_dist ** 2):
            matrix[i, j] = 1.0
            free_rows[i] = False
            free_columns[j] = False
    return matrix


def make_pair(
    shape_id: str,
    settings: ProtocolSettings,
    rng: np.random.Generator,
    n_points: int = 1024,
) -> RegistrationSample:
    """
    Generate one registration problem.

    Arguments:
        shape_id: The shape family.
        settings: The protocol settings.
        rng: The random generator.
        n_points: The number of points sampled on the shape.

    Returns:
        The sample.
    """
    base = sample_shape(shape_id, n_points, rng)
    transform = random_transform(settings.rot_range_deg, settings.trans_range, rng)

    if settings.mode == "clean":
        permutation = rng.permutation(len(base))
        target = apply_transform(transform, base).take(permutation)
        truth = np.zeros((len(base), len(base)))
        truth[permutation, np.arange(len(base))] = 1.0
        return RegistrationSample(base, target, transform, truth, settings, shape_id)

    source, target_base = base, base
    if settings.keep_fraction < 1:
        source = crop_by_plane(base, settings.keep_fraction, rng)
        target_base = crop_by_plane(base, settings.keep_fraction, rng)
    if settings.noise_sigma > 0:
        source = add_gaussian_noise(source, settings.noise_sigma, settings.noise_clip, rng)
        target_base = add_gaussian_noise(target_base, settings.noise_sigma, settings.noise_clip, rng)
    target = apply_transform(transform, target_base)
    target = target.take(rng.permutation(len(target)))
    truth = rebuild_correspondences(apply_transform(transform, source), target, settings.max_corr_dist)
    return RegistrationSample(source, target, transform, truth, settings, shape_id)


def sample_seeds(seed: int, count: int) -> List[int]:
    """
    Derive independent per-sample seeds from a dataset seed.

    Arguments:
        seed: The dataset seed.
        count: The number of samples.

    Returns:
        The seeds.
    """
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(count)]


def _sample_files(index: int) -> Dict[str, str]:
    stem = f"sample_{index:04d}"
    return {
        "source": f"{stem}_src.ply",
        "target": f"{stem}_dst.ply",
        "transform": f"{stem}_gt.txt",
        "correspondence": f"{stem}_corr.csv",
    }


def make_dataset(
    protocol: str,
    pairs: int,
    n_points: int,
    seed: int,
    out_dir: PathLike,
    role: str = "train",
) -> Dict[str, Any]:
    """
    Generate a dataset and write it to a directory.

    Every sample gets its own seed derived from the dataset seed, so a sample can be regenerated alone.

    Arguments:
        protocol: The protocol name.
        pairs: The number of samples.
        n_points: The number of points sampled per shape.
        seed: The dataset seed.
        out_dir: The output directory, created if needed.
        role: `"train"` or `"test"`, selecting shape families for the `unseen` protocol.

    Raises:
        ParameterError: When a parameter is invalid.

    Returns:
        The manifest, also written as `manifest.json`.
    """
    if pairs < 1:
        raise ParameterError(f"pairs must be >= 1, not {pairs}")
    families = shape_split(role, protocol)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    for index, sample_seed in enumerate(sample_seeds(seed, pairs)):
        rng = np.random.default_rng(sample_seed)
        shape_id = families[int(rng.integers(len(families)))]
        settings = protocol_settings(protocol, sample_seed)
        sample = make_pair(shape_id, settings, rng, n_points)
        files = _sample_files(index)
        write_cloud(out_dir / files["source"], sample.source)
        write_cloud(out_dir / files["target"], sample.target)
        write_transform(out_dir / files["transform"], sample.gt_transform)
        write_pairs(out_dir / files["correspondence"], matrix_to_pairs(sample.gt_correspondence))
        entries.append({"seed": sample_seed, "shape_id": shape_id, "settings": asdict(settings), "files": files})
        logger.debug("sample %d: %s, %d correspondences", index, shape_id, int(sample.gt_correspondence.sum()))

    manifest = {
        "generator_version": GENERATOR_VERSION,
        "protocol": protocol,
        "role": role,
        "seed": seed,
        "points": n_points,
        "pairs": pairs,
        "samples": entries,
    }
    write_json(out_dir / MANIFEST_NAME, manifest)
    logger.info("wrote %d %s samples to %s", pairs, protocol, out_dir)
    return manifest


def load_manifest(path: PathLike) -> Dict[str, Any]:
    """
    Read a dataset manifest.

    Arguments:
        path: The manifest file, or the dataset directory.

    Raises:
        OSError: When the manifest cannot be read; the message names the path.

    Returns:
        The manifest, with a `base_dir` key added.
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        manifest = read_json(path)
    except OSError as error:
        raise OSError(f"cannot read dataset manifest {path}: {error.strerror}") from error
    manifest["base_dir"] = str(path.parent)
    return manifest


def load_sample(entry: Dict[str, Any], base_dir: PathLike) -> RegistrationSample:
    """
    Read one sample of a dataset.

    Arguments:
        entry: The manifest entry.
        base_dir: The dataset directory.

    Returns:
        The sample.
    """
    base_dir = Path(base_dir)
    files = entry["files"]
    source = read_cloud(base_dir / files["source"])
    target = read_cloud(base_dir / files["target"])
    truth = pairs_to_matrix(read_pairs(base_dir / files["correspondence"]), len(source), len(target))
    return RegistrationSample(
        source=source,
        target=target,
        gt_transform=read_transform(base_dir / files["transform"]),
        gt_correspondence=truth,
        settings=ProtocolSettings(**entry["settings"]),
        shape_id=entry.get("shape_id", ""),
    )


def iter_samples(manifest: Dict[str, Any]) -> Iterator[RegistrationSample]:
    """
    Iterate over the samples of a loaded manifest.

    Arguments:
        manifest: The manifest returned by [`load_manifest`][pyrgm.synth.load_manifest].

    Yields:
        The samples, in manifest order.
    """
    for entry in manifest["samples"]:
        yield load_sample(entry, manifest["base_dir"])
