"""The iterative test-time registration loop."""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from pyrgm.errors import DegenerateGeometryError
from pyrgm.geom import PointCloud, RigidTransform, apply_transform, compose
from pyrgm.logger import get_logger
from pyrgm.net.model import rgm_forward
from pyrgm.net.weights import RgmWeights
from pyrgm.solve.estimators import ESTIMATORS, Estimator
from pyrgm.solve.lap import HardCorrespondence, soft_to_hard

logger = get_logger(__name__)


@dataclass
class RegistrationResult:
    """The outcome of registering a source cloud onto a target cloud."""

    transform: RigidTransform
    correspondences: HardCorrespondence
    increments: List[RigidTransform] = field(default_factory=list)
    iterations_run: int = 0
    degraded: bool = False
    estimator: str = "svd"
    seed: int = 0
    soft: Optional[np.ndarray] = None


def make_estimator(name: str, iters: int = 1000, threshold: float = 0.05, seed: int = 0) -> Estimator:
    """
    Instantiate an estimator by name.

    Arguments:
        name: `"svd"` or `"ransac"`.
        iters: RANSAC hypotheses.
        threshold: RANSAC inlier threshold.
        seed: RANSAC seed.

    Returns:
        The estimator.
    """
    return ESTIMATORS[name](iters=iters, threshold=threshold, seed=seed)


def register(
    cloud_x: PointCloud,
    cloud_y: PointCloud,
    weights: RgmWeights,
    estimator: str = "svd",
    iterations: int = 2,
    tau: float = 0.5,
    ransac_iters: int = 1000,
    ransac_threshold: float = 0.05,
    seed: int = 0,
) -> RegistrationResult:
    """
    Register a source cloud onto a target cloud.

    Each iteration predicts correspondences between the current source and the target,
    estimates a transform increment and applies it to the source. The final transform is the composition
    of the increments. When an estimation is degenerate, the loop stops and keeps the transform so far,
    flagging the result as degraded.

    Arguments:
        cloud_x: The source cloud.
        cloud_y: The target cloud.
        weights: The trained weights.
        estimator: `"svd"` or `"ransac"`.
        iterations: The number of iterations.
        tau: The soft-to-hard confidence threshold.
        ransac_iters: RANSAC hypotheses.
        ransac_threshold: RANSAC inlier threshold.
        seed: RANSAC seed.

    Returns:
        The result.
    """
    solver = make_estimator(estimator, ransac_iters, ransac_threshold, seed)
    shape = None if weights.network.sinkhorn_slack else (len(cloud_x), len(cloud_y))
    current = cloud_x
    total = RigidTransform.identity()
    result = RegistrationResult(
        transform=total,
        correspondences=HardCorrespondence([], len(cloud_x), len(cloud_y)),
        estimator=estimator,
        seed=seed,
    )

    for iteration in range(iterations):
        soft = rgm_forward(current, cloud_y, weights).values
        matches = soft_to_hard(soft, tau, shape)
        result.soft = soft
        result.correspondences = matches
        try:
            increment = solver.estimate(current.points, cloud_y.points, matches)
        except DegenerateGeometryError as error:
            logger.warning("iteration %d: degenerate estimation (%s), keeping previous transform", iteration, error)
            result.degraded = True
            break
        logger.debug("iteration %d: %d correspondences, increment %r", iteration, len(matches), increment)
        result.increments.append(increment)
        result.iterations_run = iteration + 1
        total = compose(increment, total)
        current = apply_transform(increment, current)

    result.transform = total
    return result
