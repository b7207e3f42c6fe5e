"""
This module defines the core 3D geometry objects and functions.

- the [`PointCloud`][pyrgm.geom.PointCloud] class
- the [`RigidTransform`][pyrgm.geom.RigidTransform] class
- transform algebra: [`apply_transform`][pyrgm.geom.apply_transform], [`compose`][pyrgm.geom.compose],
  [`invert`][pyrgm.geom.invert]
- random pose sampling: [`random_transform`][pyrgm.geom.random_transform]
- neighbor queries: [`knn`][pyrgm.geom.knn] and [`knn_all`][pyrgm.geom.knn_all]

Euler angles always use the intrinsic Z-Y-X convention, in degrees.
All functions are pure: inputs are never modified.
"""

from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from pyrgm.errors import ParameterError

EULER_CONVENTION = "ZYX"
"""Intrinsic Z-Y-X, as understood by `scipy.spatial.transform.Rotation`."""

ORTHONORMAL_TOLERANCE = 1e-6
"""Tolerance used when validating rotation matrices given by users or read from files."""

EXHAUSTIVE_KNN_LIMIT = 512
"""Below this number of points, neighbor queries use exhaustive search."""


class PointCloud:
    """
    An ordered set of 3D points, with optional per-point features.

    The points array is copied and made read-only at initialization.
    """

    def __init__(self, points: np.ndarray, features: Optional[np.ndarray] = None) -> None:
        """
        Initialization method.

        Arguments:
            points: An array of shape `(N, 3)`.
            features: An optional array with `N` rows.

        Raises:
            ParameterError: When the array is not `(N, 3)` with `N >= 1`, contains non-finite values,
                or when features do not have `N` rows.
        """
        array = np.array(points, dtype=np.float64)
        if array.ndim != 2 or array.shape[1] != 3 or array.shape[0] < 1:
            raise ParameterError(f"points must have shape (N, 3) with N >= 1, not {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ParameterError("points must be finite")
        array.setflags(write=False)
        self.points = array
        """The `(N, 3)` coordinates."""

        if features is not None:
            features = np.array(features, dtype=np.float64)
            if features.shape[0] != array.shape[0]:
                raise ParameterError(f"features must have {array.shape[0]} rows, not {features.shape[0]}")
            features.setflags(write=False)
        self.features = features
        """Optional per-point features."""

    def __len__(self) -> int:
        return self.points.shape[0]

    def __repr__(self) -> str:
        return f"<PointCloud(size={len(self)})>"

    @property
    def size(self) -> int:
        """The number of points."""
        return len(self)

    def take(self, indices: Sequence[int]) -> "PointCloud":
        """
        Return a new cloud made of the given points, in the given order.

        Arguments:
            indices: Point indices.

        Returns:
            The selected sub-cloud.
        """
        index = np.asarray(indices, dtype=np.int64)
        features = None if self.features is None else self.features[index]
        return PointCloud(self.points[index], features)


class RigidTransform:
    """A rotation plus a translation, an element of SE(3)."""

    def __init__(self, rotation: np.ndarray, translation: np.ndarray) -> None:
        """
        Initialization method.

        Arguments:
            rotation: A `(3, 3)` proper rotation matrix.
            translation: A 3-vector.

        Raises:
            ParameterError: When shapes are wrong or the matrix is not a proper rotation.
        """
        rotation = np.array(rotation, dtype=np.float64)
        translation = np.array(translation, dtype=np.float64).reshape(-1)
        if rotation.shape != (3, 3) or translation.shape != (3,):
            raise ParameterError(f"expected (3, 3) and (3,) arrays, got {rotation.shape} and {translation.shape}")
        if not (np.all(np.isfinite(rotation)) and np.all(np.isfinite(translation))):
            raise ParameterError("transform entries must be finite")
        if not np.allclose(rotation.T @ rotation, np.eye(3), atol=ORTHONORMAL_TOLERANCE):
            raise ParameterError("rotation is not orthonormal")
        if abs(np.linalg.det(rotation) - 1) > ORTHONORMAL_TOLERANCE:
            raise ParameterError("rotation determinant is not +1")
        rotation.setflags(write=False)
        translation.setflags(write=False)
        self.rotation = rotation
        """The `(3, 3)` rotation matrix."""
        self.translation = translation
        """The translation vector."""

    def __repr__(self) -> str:
        angles = ", ".join(f"{angle:.3f}" for angle in euler_angles(self.rotation))
        return f"<RigidTransform(euler_zyx=({angles}), t={self.translation.tolist()})>"

    @classmethod
    def identity(cls) -> "RigidTransform":
        """
        Build the identity transform.

        Returns:
            The identity.
        """
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_euler(cls, angles_deg: Sequence[float], translation: Sequence[float]) -> "RigidTransform":
        """
        Build a transform from intrinsic Z-Y-X Euler angles.

        Arguments:
            angles_deg: The three angles, in degrees, in Z, Y, X order.
            translation: The translation vector.

        Returns:
            The transform.
        """
        matrix = Rotation.from_euler(EULER_CONVENTION, angles_deg, degrees=True).as_matrix()
        return cls(matrix, np.asarray(translation, dtype=np.float64))

    def as_matrix(self) -> np.ndarray:
        """
        Return the homogeneous `(4, 4)` matrix.

        Returns:
            The matrix.
        """
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation
        matrix[:3, 3] = self.translation
        return matrix

    def apply(self, points: np.ndarray) -> np.ndarray:
        """
        Apply the transform to raw coordinates.

        Arguments:
            points: An `(N, 3)` array.

        Returns:
            The transformed `(N, 3)` array.
        """
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation


def euler_angles(rotation: np.ndarray) -> np.ndarray:
    """
    Decompose a rotation matrix into intrinsic Z-Y-X Euler angles.

    Arguments:
        rotation: A `(3, 3)` rotation matrix.

    Returns:
        The three angles in degrees, in Z, Y, X order.
    """
    return Rotation.from_matrix(rotation).as_euler(EULER_CONVENTION, degrees=True)


def apply_transform(transform: RigidTransform, cloud: PointCloud) -> PointCloud:
    """
    Apply a rigid transform to every point of a cloud.

    Arguments:
        transform: The transform `(R, t)`.
        cloud: The cloud.

    Returns:
        A new cloud whose point `i` is `R @ x_i + t`, same order, same features.
    """
    return PointCloud(transform.apply(cloud.points), cloud.features)


def compose(second: RigidTransform, first: RigidTransform) -> RigidTransform:
    """
    Compose two transforms.

    Arguments:
        second: The transform applied last.
        first: The transform applied first.

    Returns:
        The transform `x -> second(first(x))`.
    """
    rotation = second.rotation @ first.rotation
    translation = second.rotation @ first.translation + second.translation
    return RigidTransform(rotation, translation)


def invert(transform: RigidTransform) -> RigidTransform:
    """
    Invert a transform.

    Arguments:
        transform: The transform `(R, t)`.

    Returns:
        The transform `(R^T, -R^T t)`.
    """
    rotation = transform.rotation.T
    return RigidTransform(rotation, -rotation @ transform.translation)


def random_transform(rot_range_deg: float, trans_range: float, rng: np.random.Generator) -> RigidTransform:
    """
    Sample a random rigid transform.

    Each of the three Z-Y-X Euler angles is uniform in `[0, rot_range_deg]`,
    each translation component is uniform in `[-trans_range, trans_range]`.

    Arguments:
        rot_range_deg: Upper bound of the Euler angles, in `[0, 180]` degrees.
        trans_range: Bound of the translation components, non-negative.
        rng: The random generator.

    Raises:
        ParameterError: When a range is out of bounds.

    Returns:
        The sampled transform.
    """
    if not 0 <= rot_range_deg <= 180:
        raise ParameterError(f"rot_range_deg must be in [0, 180], not {rot_range_deg}")
    if trans_range < 0:
        raise ParameterError(f"trans_range must be >= 0, not {trans_range}")
    angles = rng.uniform(0, rot_range_deg, size=3)
    translation = rng.uniform(-trans_range, trans_range, size=3)
    return RigidTransform.from_euler(angles, translation)


def squared_distances(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    """
    Compute squared Euclidean distances from every point to a query point.

    The summation order is fixed, so equal inputs always give bit-identical outputs.

    Arguments:
        points: An `(N, 3)` array.
        query: A 3-vector.

    Returns:
        An array of `N` squared distances.
    """
    delta = points - query
    return (delta * delta).sum(axis=1)


def pairwise_squared_distances(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """
    Compute all squared Euclidean distances between two point sets.

    Entry `(i, j)` is bit-identical to `squared_distances(second, first[i])[j]`.

    Arguments:
        first: An `(N, 3)` array.
        second: An `(M, 3)` array.

    Returns:
        An `(N, M)` array.
    """
    delta = first[:, None, :] - second[None, :, :]
    return (delta * delta).sum(axis=2)


def _check_k(size: int, k: int) -> None:
    if k < 1 or k >= size:
        raise ParameterError(f"K must be in [1, N - 1] = [1, {size - 1}], not {k}")


def _order_neighbors(distances: np.ndarray, candidates: np.ndarray, query_index: int, k: int) -> np.ndarray:
    keep = candidates != query_index
    candidates = candidates[keep]
    distances = distances[keep]
    # candidates are sorted ascending, so a stable sort breaks ties by lower index
    order = np.argsort(distances, kind="stable")
    return candidates[order[:k]]


def knn(cloud: PointCloud, query_index: int, k: int, tree: Optional[cKDTree] = None) -> np.ndarray:
    """
    Find the `k` nearest neighbors of one point of a cloud.

    Ties are broken by lower index. The query point itself is never returned.
    Clouds with fewer than [`EXHAUSTIVE_KNN_LIMIT`][pyrgm.geom.EXHAUSTIVE_KNN_LIMIT] points use exhaustive search;
    larger clouds prefilter candidates with a k-d tree, then rank them exactly like the exhaustive search does.

    Arguments:
        cloud: The cloud.
        query_index: The index of the query point.
        k: The number of neighbors, in `[1, N - 1]`.
        tree: An optional prebuilt `cKDTree` over `cloud.points`.

    Raises:
        ParameterError: When `k` is out of range or the query index is invalid.

    Returns:
        The `k` neighbor indices, sorted by ascending distance.
    """
    size = len(cloud)
    _check_k(size, k)
    if not 0 <= query_index < size:
        raise ParameterError(f"query index {query_index} out of range for {size} points")
    points = cloud.points
    query = points[query_index]

    if size < EXHAUSTIVE_KNN_LIMIT and tree is None:
        candidates = np.arange(size)
        return _order_neighbors(squared_distances(points, query), candidates, query_index, k)

    if tree is None:
        tree = cKDTree(points)
    distances, _ = tree.query(query, k=k + 1)
    radius = float(distances[-1])
    # widen the ball so that points tied with the k-th neighbor are all kept
    ball = tree.query_ball_point(query, radius * (1 + 1e-9) + 1e-12)
    candidates = np.array(sorted(ball), dtype=np.int64)
    return _order_neighbors(squared_distances(points[candidates], query), candidates, query_index, k)


def knn_all(cloud: PointCloud, k: int) -> np.ndarray:
    """
    Find the `k` nearest neighbors of every point of a cloud.

    Arguments:
        cloud: The cloud.
        k: The number of neighbors, in `[1, N - 1]`.

    Returns:
        An `(N, k)` integer array whose row `i` equals `knn(cloud, i, k)`.
    """
    size = len(cloud)
    _check_k(size, k)
    if size >= EXHAUSTIVE_KNN_LIMIT:
        tree = cKDTree(cloud.points)
        return np.stack([knn(cloud, index, k, tree=tree) for index in range(size)])

    distances = pairwise_squared_distances(cloud.points, cloud.points)
    np.fill_diagonal(distances, np.inf)
    return np.argsort(distances, axis=1, kind="stable")[:, :k]
