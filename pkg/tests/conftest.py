"""Shared fixtures: seeded generators, random points, tangents and quadratic costs."""

from __future__ import annotations

import numpy as np
import pytest

from data.problems import LeastSquaresCost
from geometry.manifold import ManifoldDims, random_point, random_tangent


def spd_matrix(size: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.standard_normal((size, size))
    return A @ A.T / size + np.eye(size)


def rel_err(a, b) -> float:
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-300)
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b))) / scale


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=[(2, 1), (3, 2), (3, 3)], ids=lambda d: f"n{d[0]}k{d[1]}")
def dims(request):
    return ManifoldDims(*request.param)


@pytest.fixture
def point(dims, rng):
    return random_point(dims, rng)


@pytest.fixture
def tangent(point, rng):
    return random_tangent(point, rng)


@pytest.fixture
def quadratic_cost(point, rng):
    two_n, two_k = point.X.shape
    return LeastSquaresCost(rng.standard_normal((two_n, two_n)), rng.standard_normal((two_n, two_k)))
