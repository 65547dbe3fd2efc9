import numpy as np
import pytest

from conftest import rel_err, spd_matrix
from data.generators import (
    GENERATORS,
    block_symplectic,
    gyroscopic_matrix,
    gyroscopic_trace_instance,
    least_squares_instance,
    least_squares_sparse_instance,
    quartic_instance,
    sprandsym_like,
    synthetic_trace_matrix,
    trace_instance,
)
from data.problems import (
    LeastSquaresCost,
    QuarticTraceCost,
    TraceCost,
    least_squares_problem,
    quartic_trace_problem,
    trace_problem,
)
from geometry.errors import DefinitenessError, DimensionError
from geometry.linalg import is_spd
from geometry.manifold import ManifoldDims, feasibility, poisson, random_point


def _costs(rng, n):
    return [
        LeastSquaresCost(rng.standard_normal((2 * n, 2 * n)), rng.standard_normal((2 * n, 2 * n))),
        TraceCost(spd_matrix(2 * n, rng)),
        QuarticTraceCost(spd_matrix(2 * n, rng), spd_matrix(2 * n, rng)),
    ]


@pytest.mark.parametrize("n", [1, 3])
def test_egrad_matches_value_differences(rng, n):
    X = rng.standard_normal((2 * n, 2 * n))
    Z = rng.standard_normal(X.shape)
    h = 1e-6
    for cost in _costs(rng, n):
        fd = (cost.value(X + h * Z) - cost.value(X - h * Z)) / (2 * h)
        assert fd == pytest.approx(float(np.sum(cost.egrad(X) * Z)), rel=1e-6, abs=1e-8), cost.name


@pytest.mark.parametrize("n", [1, 3])
def test_ehess_matches_gradient_differences(rng, n):
    X = rng.standard_normal((2 * n, 2 * n))
    Z = rng.standard_normal(X.shape)
    h = 1e-6
    for cost in _costs(rng, n):
        fd = (cost.egrad(X + h * Z) - cost.egrad(X - h * Z)) / (2 * h)
        assert rel_err(fd, cost.ehess(X, Z)) <= 1e-6, cost.name


def test_constant_hessian_matrix(rng):
    ls, tr, quartic = _costs(rng, 2)
    Z = rng.standard_normal((4, 4))
    assert np.allclose(ls.constant_hessian_matrix @ Z, ls.ehess(None, Z))
    assert tr.constant_hessian_matrix is tr.A
    assert quartic.constant_hessian_matrix is None


def test_least_squares_known_minimizer():
    problem = least_squares_instance(n=6, k=2, seed=2)
    X_min = problem.known_minimizer
    assert X_min is not None and problem.f_min == 0.0
    assert feasibility(X_min) <= 1e-10 * max(1.0, np.linalg.norm(X_min) ** 2)
    assert problem.cost.value(X_min) <= 1e-20 * max(1.0, np.linalg.norm(problem.cost.A) ** 2)
    assert problem.rel_dist_to_known_min(X_min) == 0.0


def test_least_squares_without_symplectic_data(rng):
    problem = least_squares_problem(spd_matrix(4, rng), rng.standard_normal((4, 2)))
    assert problem.known_minimizer is None
    assert problem.rel_dist_to_known_min(np.eye(4, 2)) is None
    assert problem.dims == ManifoldDims(2, 1)


def test_problem_validation(rng):
    with pytest.raises(DimensionError):
        least_squares_problem(np.eye(3), np.eye(3, 2))
    with pytest.raises(DimensionError):
        least_squares_problem(np.eye(4), np.eye(6, 2))
    with pytest.raises(DefinitenessError):
        least_squares_problem(np.zeros((4, 4)), np.eye(4, 2))
    with pytest.raises(DefinitenessError):
        trace_problem(-np.eye(4), 1)
    with pytest.raises(DimensionError):
        trace_problem(np.eye(4), 3)
    with pytest.raises(DefinitenessError):
        quartic_trace_problem(np.eye(4), -np.eye(4))
    with pytest.raises(DimensionError):
        quartic_trace_problem(np.eye(4), np.eye(6))
    with pytest.raises(DimensionError):
        quartic_trace_problem(np.eye(4), np.eye(4), x0=random_point(ManifoldDims(2, 1), 0))


def test_problem_to_dict():
    d = trace_instance(n=6, k=2, seed=1).to_dict()
    assert d["name"] == "trace" and d["n"] == 6 and d["k"] == 2
    assert d["f_min"] == 3.0
    assert d["family"] == "trace" and d["seed"] == 1
    assert d["has_known_minimizer"] is False


# ── Generators ────────────────────────────────────────────────────────────────

def test_generators_are_deterministic():
    a = least_squares_instance(n=5, k=2, seed=9)
    b = least_squares_instance(n=5, k=2, seed=9)
    c = least_squares_instance(n=5, k=2, seed=10)
    assert np.array_equal(a.cost.A, b.cost.A)
    assert np.array_equal(a.x0.X, b.x0.X)
    assert not np.array_equal(a.cost.B, c.cost.B)


def test_block_symplectic(rng):
    A1 = spd_matrix(3, rng)
    A2 = spd_matrix(3, rng)
    assert feasibility(block_symplectic(A1, A2)) <= 1e-10 * np.linalg.norm(A1) * np.linalg.norm(A2) ** 2


def test_sprandsym_like_is_spd(rng):
    A = sprandsym_like(12, 0.25, 0.1, rng)
    assert is_spd(A)
    eigs = np.linalg.eigvalsh(A)
    assert eigs.max() / eigs.min() == pytest.approx(10.0, rel=1e-8)


def test_trace_matrix_has_integer_symplectic_spectrum():
    n = 6
    A = synthetic_trace_matrix(n, seed=4)
    assert is_spd(A)
    # eigenvalues of J A are ±i d_j with d_j the symplectic eigenvalues
    eigs = np.linalg.eigvals(poisson(n) @ A)
    d = np.sort(np.abs(eigs.imag))
    expected = np.repeat(np.arange(1, n + 1, dtype=float), 2)
    assert np.allclose(d, expected, rtol=1e-6)
    assert np.allclose(eigs.real, 0.0, atol=1e-6 * n)


def test_trace_instance_records_minimum():
    problem = trace_instance(n=8, k=3, seed=0)
    assert problem.f_min == 6.0
    assert problem.x0.feas == 0.0


def test_gyroscopic_family():
    A = gyroscopic_matrix(15)
    assert is_spd(A)
    assert np.linalg.norm(A) == pytest.approx(1.0)
    problem = gyroscopic_trace_instance(n=15, k=2, seed=1)
    assert problem.metadata["synthetic_stand_in"] is True
    assert problem.x0.feas <= 1e-8


def test_quartic_instance():
    problem = quartic_instance(n=4, seed=0)
    assert problem.dims == ManifoldDims(4, 4)
    assert problem.x0.feas <= 1e-12
    assert problem.cost.constant_hessian_matrix is None


def test_sparse_least_squares_has_known_minimizer():
    problem = least_squares_sparse_instance(grid=3, k=2, seed=0)
    assert problem.dims == ManifoldDims(9, 2)
    assert problem.known_minimizer is not None


def test_generator_registry():
    assert set(GENERATORS) == {"least_squares", "least_squares_sparse", "trace", "gyroscopic", "quartic"}
