"""
Rigid transform estimators.

Estimators take matched point pairs and return the rigid transform mapping the source points onto the target points.
They are registered by name in [`ESTIMATORS`][pyrgm.solve.estimators.ESTIMATORS].
"""

from abc import ABCMeta, abstractmethod
from typing import Dict, Optional, Tuple, Type

import numpy as np

from pyrgm.errors import DegenerateGeometryError, ParameterError
from pyrgm.geom import RigidTransform
from pyrgm.logger import get_logger
from pyrgm.solve.lap import HardCorrespondence

logger = get_logger(__name__)

RANK_TOLERANCE = 1e-12
"""Relative singular value under which the cross-covariance counts as rank-deficient."""

MIN_PAIRS = 3


def fit_pairs(source: np.ndarray, target: np.ndarray, weights: Optional[np.ndarray] = None) -> RigidTransform:
    """
    Fit the rigid transform minimizing the weighted squared distances between matched points.

    Weighted centroids are removed, the cross-covariance `H = sum w (x - x0)(y - y0)^T` is decomposed as `U S V^T`,
    and `R = V diag(1, 1, det(V U^T)) U^T`, `t = y0 - R x0`, which is always a proper rotation.

    Arguments:
        source: The `(K, 3)` source points.
        target: The `(K, 3)` matched target points.
        weights: `K` non-negative weights, or `None` for unit weights.

    Raises:
        DegenerateGeometryError: With fewer than three weighted pairs, or when the points are collinear.

    Returns:
        The transform.
    """
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    weights = np.ones(len(source)) if weights is None else np.asarray(weights, dtype=np.float64)
    if source.shape != target.shape:
        raise ParameterError(f"fit_pairs: shapes differ, {source.shape} != {target.shape}")
    if np.count_nonzero(weights > 0) < MIN_PAIRS:
        raise DegenerateGeometryError(f"need at least {MIN_PAIRS} pairs, got {np.count_nonzero(weights > 0)}")

    total = weights.sum()
    source_center = weights @ source / total
    target_center = weights @ target / total
    covariance = (source - source_center).T @ (weights[:, None] * (target - target_center))
    left, singular, right_t = np.linalg.svd(covariance)
    if singular[0] == 0 or singular[1] <= RANK_TOLERANCE * singular[0]:
        raise DegenerateGeometryError(f"rank-deficient cross-covariance, singular values {singular.tolist()}")

    right = right_t.T
    correction = np.diag([1.0, 1.0, np.sign(np.linalg.det(right @ left.T))])
    rotation = right @ correction @ left.T
    return RigidTransform(rotation, target_center - rotation @ source_center)


def weighted_svd(source: np.ndarray, target: np.ndarray, correspondence: np.ndarray) -> RigidTransform:
    """
    Estimate the transform from a correspondence weight matrix.

    Every nonzero entry `C[i, j]` contributes the pair `(x_i, y_j)` with weight `C[i, j]`;
    binary matrices give unit weights.

    Arguments:
        source: The `(N, 3)` source points.
        target: The `(M, 3)` target points.
        correspondence: The `(N, M)` non-negative weights.

    Returns:
        The transform.
    """
    correspondence = np.asarray(correspondence, dtype=np.float64)
    rows, columns = np.nonzero(correspondence)
    return fit_pairs(source[rows], target[columns], correspondence[rows, columns])


def residuals(transform: RigidTransform, source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """
    Compute the distances between transformed source points and their matched target points.

    Arguments:
        transform: The transform.
        source: The `(K, 3)` source points.
        target: The `(K, 3)` target points.

    Returns:
        `K` distances.
    """
    return np.linalg.norm(transform.apply(source) - target, axis=1)


def ransac_consensus(
    source: np.ndarray,
    target: np.ndarray,
    iters: int,
    inlier_thresh: float,
    rng: np.random.Generator,
) -> Tuple[RigidTransform, np.ndarray]:
    """
    Estimate a transform robust to wrong matches.

    Each hypothesis is fitted on three random pairs and scored by the number of pairs whose residual
    is below the threshold; the first hypothesis with the most inliers wins. The winner is refitted on its
    inliers when there are at least three of them, otherwise its three-pair model is returned.

    Arguments:
        source: The `(K, 3)` source points.
        target: The `(K, 3)` matched target points.
        iters: The number of hypotheses.
        inlier_thresh: The inlier residual threshold.
        rng: The random generator.

    Raises:
        ParameterError: When `iters < 1`.
        DegenerateGeometryError: With fewer than three pairs, or when every hypothesis is degenerate.

    Returns:
        The transform and the boolean inlier mask.
    """
    if iters < 1:
        raise ParameterError(f"iters must be >= 1, not {iters}")
    count = len(source)
    if count < MIN_PAIRS:
        raise DegenerateGeometryError(f"need at least {MIN_PAIRS} pairs, got {count}")

    samples = [rng.choice(count, size=MIN_PAIRS, replace=False) for _ in range(iters)]
    best: Optional[RigidTransform] = None
    best_inliers = np.zeros(count, dtype=bool)
    for sample in samples:
        try:
            hypothesis = fit_pairs(source[sample], target[sample])
        except DegenerateGeometryError:
            continue
        inliers = residuals(hypothesis, source, target) < inlier_thresh
        if best is None or inliers.sum() > best_inliers.sum():
            best, best_inliers = hypothesis, inliers
    if best is None:
        raise DegenerateGeometryError(f"all {iters} hypotheses were degenerate")

    if best_inliers.sum() >= MIN_PAIRS:
        try:
            refined = fit_pairs(source[best_inliers], target[best_inliers])
        except DegenerateGeometryError:
            logger.debug("consensus set is degenerate, keeping the three-pair model")
        else:
            return refined, best_inliers
    return best, best_inliers


def ransac_estimate(
    source: np.ndarray,
    target: np.ndarray,
    iters: int = 1000,
    inlier_thresh: float = 0.05,
    rng: Optional[np.random.Generator] = None,
) -> RigidTransform:
    """
    Estimate a transform with RANSAC.

    See [`ransac_consensus`][pyrgm.solve.estimators.ransac_consensus].

    Arguments:
        source: The `(K, 3)` source points.
        target: The `(K, 3)` matched target points.
        iters: The number of hypotheses.
        inlier_thresh: The inlier residual threshold.
        rng: The random generator; seeded with 0 when omitted.

    Returns:
        The transform.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    transform, _ = ransac_consensus(source, target, iters, inlier_thresh, rng)
    return transform


class Estimator(metaclass=ABCMeta):
    """A helper class to estimate a transform from hard correspondences."""

    name = ""

    @abstractmethod
    def estimate(self, source: np.ndarray, target: np.ndarray, matches: HardCorrespondence) -> RigidTransform:
        """
        Estimate the transform.

        Arguments:
            source: The `(N, 3)` source points.
            target: The `(M, 3)` target points.
            matches: The correspondences.

        Returns:
            The transform.
        """
        raise NotImplementedError


class SvdEstimator(Estimator):
    """Closed-form weighted SVD on all the correspondences."""

    name = "svd"

    def __init__(self, **options) -> None:
        """
        Initialization method.

        Arguments:
            **options: Ignored; accepted so every estimator can be built from the same settings.
        """

    def estimate(self, source, target, matches) -> RigidTransform:  # noqa: D102
        return weighted_svd(source, target, matches.matrix)


class RansacEstimator(Estimator):
    """RANSAC over the correspondences."""

    name = "ransac"

    def __init__(self, iters: int = 1000, threshold: float = 0.05, seed: int = 0, **options) -> None:
        """
        Initialization method.

        Arguments:
            iters: The number of hypotheses per estimation.
            threshold: The inlier residual threshold.
            seed: The seed of the generator shared by successive estimations.
            **options: Ignored.
        """
        self.iters = iters
        self.threshold = threshold
        self.rng = np.random.default_rng(seed)

    def estimate(self, source, target, matches) -> RigidTransform:  # noqa: D102
        return ransac_estimate(source[matches.sources], target[matches.targets], self.iters, self.threshold, self.rng)


ESTIMATORS: Dict[str, Type[Estimator]] = {"svd": SvdEstimator, "ransac": RansacEstimator}
"""Estimators by configuration name."""
