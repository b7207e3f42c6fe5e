"""
pyrgm package.

Rigid point cloud registration by deep graph matching: synthetic data, a small differentiable network,
correspondence solving, transform estimation and evaluation metrics.
"""

from typing import List

__all__: List[str] = []  # noqa: WPS410 (the only __variable__ we use)
