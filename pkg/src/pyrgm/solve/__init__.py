"""Correspondence solving, transform estimation and the registration loop."""

from pyrgm.solve.estimators import ESTIMATORS, ransac_estimate, weighted_svd
from pyrgm.solve.lap import HardCorrespondence, lap_hungarian, soft_to_hard
from pyrgm.solve.register import RegistrationResult, register

__all__ = [  # noqa: WPS410
    "ESTIMATORS",
    "HardCorrespondence",
    "RegistrationResult",
    "lap_hungarian",
    "ransac_estimate",
    "register",
    "soft_to_hard",
    "weighted_svd",
]
