"""Synthetic 3-D to 2-D mixture used to visualize unbalanced alignment.

Source: balanced mixture of uniform distributions on two solid ellipsoids
in 3-D. Target: mixture ``0.85 * ellipse + 0.15 * square`` of uniform
distributions on a solid ellipse and a square in 2-D. The geometric
constants below are choices of this package, not recovered values.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

from .core_types import EmptyDataset, PointCloud

SOURCE_CENTERS = np.array([[-0.6, 0.0, 0.0], [0.6, 0.0, 0.0]])
SOURCE_AXES = np.array([[0.35, 0.2, 0.12], [0.3, 0.25, 0.1]])
ELLIPSE_CENTER = np.array([0.0, 0.0])
ELLIPSE_AXES = np.array([0.7, 0.3])
SQUARE_CENTER = np.array([0.0, 0.75])
SQUARE_HALF_SIDE = 0.2
ELLIPSE_SHARE = 0.85


def _uniform_ball(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    direction = rng.standard_normal((n, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = rng.random(n) ** (1.0 / dim)
    return direction * radius[:, None]


def make_toy(seed: int, n_source: int, n_target: int) -> Tuple[PointCloud, PointCloud]:
    """Draw the labeled source (3-D) and target (2-D) samples."""
    if n_source < 1 or n_target < 1:
        raise EmptyDataset("toy data needs at least one source and one target point")
    rng = np.random.default_rng(seed)

    comp = rng.integers(0, 2, size=n_source)
    X = SOURCE_CENTERS[comp] + SOURCE_AXES[comp] * _uniform_ball(rng, n_source, 3)
    src_labels = tuple(f"ellipsoid_{c}" for c in comp)

    on_ellipse = rng.random(n_target) < ELLIPSE_SHARE
    ell = ELLIPSE_CENTER + ELLIPSE_AXES * _uniform_ball(rng, n_target, 2)
    sq = SQUARE_CENTER + SQUARE_HALF_SIDE * rng.uniform(-1.0, 1.0, size=(n_target, 2))
    Y = np.where(on_ellipse[:, None], ell, sq)
    tgt_labels = tuple("ellipse" if e else "square" for e in on_ellipse)

    return PointCloud(X, src_labels, "toy_source"), PointCloud(Y, tgt_labels, "toy_target")
