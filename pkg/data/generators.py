"""
Seeded generators for the experiment families.

Every instance is built from numpy's PCG64 generator (``default_rng(seed)``),
with independent child streams per random ingredient, so runs are
reproducible across platforms.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse

import config
from data.problems import Problem, least_squares_problem, quartic_trace_problem, trace_problem
from geometry.linalg import symplectic_factor
from geometry.manifold import ManifoldDims, SymplecticPoint, canonical_point


def _streams(seed: Optional[int], count: int) -> list[np.random.Generator]:
    """Independent child generators so each random ingredient has its own stream."""
    root = np.random.SeedSequence(config.DEFAULT_SEED if seed is None else seed)
    return [np.random.default_rng(s) for s in root.spawn(count)]


# ── Building blocks ───────────────────────────────────────────────────────────

def block_symplectic(A1: np.ndarray, A2: np.ndarray) -> np.ndarray:
    """[I A1; A2 I + A2 A1], symplectic whenever A1 and A2 are symmetric."""
    n = A1.shape[0]
    I = np.eye(n)
    return np.block([[I, A1], [A2, I + A2 @ A1]])


def random_symplectic_factor(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return symplectic_factor(rng.standard_normal((rows, cols)))


def sprandsym_like(n: int, density: float, rc: float, rng: np.random.Generator) -> np.ndarray:
    """
    Sparse-pattern symmetric positive definite matrix with condition number 1/rc,
    obtained from random Jacobi rotations of a diagonal matrix until the
    requested density is reached.
    """
    eigs = np.geomspace(rc, 1.0, n)
    rng.shuffle(eigs)
    A = np.diag(eigs)
    target = max(n, int(round(density * n * n)))
    for _ in range(4 * n):
        if np.count_nonzero(A) >= target:
            break
        i, j = rng.choice(n, size=2, replace=False)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        c, s = np.cos(theta), np.sin(theta)
        ri, rj = A[i].copy(), A[j].copy()
        A[i], A[j] = c * ri - s * rj, s * ri + c * rj
        ci, cj = A[:, i].copy(), A[:, j].copy()
        A[:, i], A[:, j] = c * ci - s * cj, s * ci + c * cj
    return 0.5 * (A + A.T)


def poisson2d(grid: int) -> np.ndarray:
    """Five-point Laplacian on a grid×grid mesh (size grid²)."""
    T = scipy.sparse.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(grid, grid))
    I = scipy.sparse.identity(grid)
    return (scipy.sparse.kron(I, T) + scipy.sparse.kron(T, I)).toarray()


def tridiag(n: int) -> np.ndarray:
    return scipy.sparse.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n)).toarray()


# ── Least squares ─────────────────────────────────────────────────────────────

def least_squares_instance(n: int = 50, k: int = 6, seed: Optional[int] = None) -> Problem:
    """Dense symplectic A from symmetrized uniform blocks, symplectic B, random X0."""
    rng_a, rng_b, rng_x = _streams(seed, 3)
    A1 = rng_a.random((n, n))
    A2 = rng_a.random((n, n))
    A = block_symplectic(0.1 * (A1 + A1.T), 0.1 * (A2 + A2.T))
    B = random_symplectic_factor(2 * n, 2 * k, rng_b)
    x0 = SymplecticPoint(random_symplectic_factor(2 * n, 2 * k, rng_x))
    problem = least_squares_problem(A, B, x0=x0)
    problem.metadata.update({"family": "least_squares", "seed": seed})
    return problem


def least_squares_sparse_instance(grid: int = 20, k: int = 10, seed: Optional[int] = None) -> Problem:
    """A1 = ½·(2-D Poisson), A2 = 0.1·tridiag(−1, 2, −1); n = grid²."""
    n = grid * grid
    rng_b, rng_x = _streams(seed, 2)
    A = block_symplectic(0.5 * poisson2d(grid), 0.1 * tridiag(n))
    B = random_symplectic_factor(2 * n, 2 * k, rng_b)
    x0 = SymplecticPoint(random_symplectic_factor(2 * n, 2 * k, rng_x))
    problem = least_squares_problem(A, B, x0=x0, name="least_squares_sparse")
    problem.metadata.update({"family": "least_squares_sparse", "seed": seed, "grid": grid})
    return problem


# ── Trace minimization ────────────────────────────────────────────────────────

def synthetic_trace_matrix(n: int, seed: Optional[int] = None) -> np.ndarray:
    """S^T D̃ S with D̃ = diag(1..n, 1..n) and S block symplectic; symplectic spectrum 1..n."""
    rng1, rng2 = _streams(seed, 2)
    S1 = sprandsym_like(n, 3.0 / n, 0.1, rng1)
    S2 = sprandsym_like(n, 3.0 / n, 0.01, rng2)
    S = block_symplectic(S1, S2)
    d = np.tile(np.arange(1, n + 1, dtype=float), 2)
    A = S.T @ (d[:, None] * S)
    return 0.5 * (A + A.T)


def trace_instance(n: int = 200, k: int = 5, seed: Optional[int] = None) -> Problem:
    A = synthetic_trace_matrix(n, seed)
    dims = ManifoldDims(n=n, k=k)
    problem = trace_problem(A, k, x0=canonical_point(dims), f_min=k * (k + 1) / 2.0)
    problem.metadata.update({"family": "trace", "seed": seed})
    return problem


def gyroscopic_matrix(n: int, velocity: float = 0.5, damping: float = 1e-3) -> np.ndarray:
    """
    Energy matrix of an axially moving string discretized with n nodes:
    [K + ¼GᵀG, ½Gᵀ; ½G, I] with stiffness K, transport (skew) G and a weak
    damping shift on the stiffness diagonal, normalized in Frobenius norm.
    """
    h = 1.0 / (n + 1)
    K = tridiag(n) / h**2 + damping * np.eye(n)
    G = velocity / h * scipy.sparse.diags([-1.0, 1.0], [-1, 1], shape=(n, n)).toarray()
    A = np.block([[K + 0.25 * G.T @ G, 0.5 * G.T], [0.5 * G, np.eye(n)]])
    A = 0.5 * (A + A.T)
    return A / np.linalg.norm(A)


def gyroscopic_trace_instance(
    n: int = 200,
    k: int = 5,
    velocity: float = 0.5,
    damping: float = 1e-3,
    seed: Optional[int] = None,
) -> Problem:
    (rng_x,) = _streams(seed, 1)
    A = gyroscopic_matrix(n, velocity, damping)
    x0 = SymplecticPoint(random_symplectic_factor(2 * n, 2 * k, rng_x))
    problem = trace_problem(A, k, x0=x0, name="trace_gyroscopic")
    problem.label = "gyroscopic trace (synthetic stand-in)"
    problem.metadata.update(
        {"family": "gyroscopic", "seed": seed, "velocity": velocity, "damping": damping, "synthetic_stand_in": True}
    )
    return problem


# ── Quartic trace ─────────────────────────────────────────────────────────────

def quartic_instance(n: int = 20, seed: Optional[int] = None) -> Problem:
    """A = A1ᵀA1, B = B1ᵀB1 (normalized); X0 = diag(Q, Q) with Q orthogonal."""
    rng_a, rng_b, rng_q = _streams(seed, 3)
    A1 = rng_a.random((2 * n, 2 * n))
    B1 = rng_b.random((2 * n, 2 * n))
    A = A1.T @ A1
    B = B1.T @ B1
    A /= np.linalg.norm(A)
    B /= np.linalg.norm(B)
    Q, _ = scipy.linalg.qr(rng_q.random((n, n)))
    x0 = SymplecticPoint(scipy.linalg.block_diag(Q, Q))
    problem = quartic_trace_problem(A, B, x0=x0)
    problem.metadata.update({"family": "quartic", "seed": seed})
    return problem


GENERATORS = {
    "least_squares": least_squares_instance,
    "least_squares_sparse": least_squares_sparse_instance,
    "trace": trace_instance,
    "gyroscopic": gyroscopic_trace_instance,
    "quartic": quartic_instance,
}
