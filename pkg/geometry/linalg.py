"""
Dense kernels the geometry layer builds on.

Symmetric / skew parts, the spd Lyapunov solver, Kronecker and vectorization
calculus (column-major throughout), the SR decomposition by symplectic
Gram–Schmidt, and Matrix Market I/O.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Union

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse

import config
from geometry.errors import DefinitenessError, DimensionError, InvariantError, SRBreakdownError


# ── Symmetric / skew parts ────────────────────────────────────────────────────

def _require_square(A: np.ndarray, what: str = "matrix") -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{what} must be square, got shape {A.shape}")


def sym(A: np.ndarray) -> np.ndarray:
    _require_square(A)
    return 0.5 * (A + A.T)


def skew(A: np.ndarray) -> np.ndarray:
    _require_square(A)
    return 0.5 * (A - A.T)


def is_skew(A: np.ndarray, tol: float = 1e-12) -> bool:
    scale = max(1.0, float(np.linalg.norm(A)))
    return float(np.linalg.norm(A + A.T)) <= tol * scale


# ── Lyapunov equations C Ω + Ω C = R ──────────────────────────────────────────

class LyapunovSolver:
    """
    Solves C Ω + Ω C = R for a fixed spd coefficient C.

    The eigendecomposition C = QΛQ^T is computed once, so repeated solves with
    the same coefficient (projection, Ω, Θ, Ξ at one point) cost two 2k×2k
    products each.
    """

    def __init__(self, C: np.ndarray, sym_tol: float = config.SPD_SYM_TOL):
        C = np.asarray(C, dtype=float)
        _require_square(C, "Lyapunov coefficient")
        scale = max(float(np.linalg.norm(C)), np.finfo(float).tiny)
        if np.linalg.norm(C - C.T) > sym_tol * scale:
            raise DefinitenessError("Lyapunov coefficient is not symmetric")
        eigvals, Q = np.linalg.eigh(sym(C))
        if eigvals[0] <= 0.0:
            raise DefinitenessError(
                f"Lyapunov coefficient is not positive definite (λ_min = {eigvals[0]:.3e})"
            )
        self.eigvals = eigvals
        self.Q = Q
        self._denom = eigvals[:, None] + eigvals[None, :]

    @property
    def size(self) -> int:
        return self.eigvals.shape[0]

    def solve(self, R: np.ndarray, skew_output: bool = False) -> np.ndarray:
        if R.shape != (self.size, self.size):
            raise DimensionError(f"right-hand side shape {R.shape} != {(self.size, self.size)}")
        Rt = self.Q.T @ R @ self.Q
        Omega = self.Q @ (Rt / self._denom) @ self.Q.T
        if skew_output:
            Omega = 0.5 * (Omega - Omega.T)
        return Omega


def solve_lyapunov_spd(C: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Solve CΩ + ΩC = R with C spd; a skew R yields an exactly skew Ω."""
    return LyapunovSolver(C).solve(R, skew_output=is_skew(R))


# ── Vectorization calculus ────────────────────────────────────────────────────

def vec(Z: np.ndarray) -> np.ndarray:
    return np.asarray(Z).reshape(-1, order="F")


def unvec(z: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return np.asarray(z).reshape((rows, cols), order="F")


def _strict_upper_colmajor(m: int) -> tuple[np.ndarray, np.ndarray]:
    # strict upper triangle, column by column: (0,1), (0,2), (1,2), (0,3), ...
    rows, cols = [], []
    for j in range(m):
        for i in range(j):
            rows.append(i)
            cols.append(j)
    return np.array(rows, dtype=int), np.array(cols, dtype=int)


def veck(Omega: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Stack the strict upper triangle of a skew matrix, column by column."""
    _require_square(Omega, "veck input")
    if not is_skew(Omega, tol):
        raise InvariantError("veck expects a skew-symmetric matrix")
    rows, cols = _strict_upper_colmajor(Omega.shape[0])
    return Omega[rows, cols].copy()


def unveck(w: np.ndarray, m: int) -> np.ndarray:
    rows, cols = _strict_upper_colmajor(m)
    Omega = np.zeros((m, m))
    Omega[rows, cols] = w
    Omega[cols, rows] = -np.asarray(w)
    return Omega


@lru_cache(maxsize=32)
def _duplication_matrix_cached(m: int) -> np.ndarray:
    rows, cols = _strict_upper_colmajor(m)
    D = np.zeros((m * m, rows.size))
    for p, (i, j) in enumerate(zip(rows, cols)):
        D[i + j * m, p] = 1.0
        D[j + i * m, p] = -1.0
    D.setflags(write=False)
    return D


def duplication_matrix(m: int) -> np.ndarray:
    """D_m with vec(Ω) = D_m veck(Ω) for skew Ω ∈ R^{m×m}; cached per size."""
    if m < 1:
        raise DimensionError("duplication matrix needs m ≥ 1")
    return _duplication_matrix_cached(m)


@lru_cache(maxsize=32)
def _commutation_matrix_cached(p: int, q: int) -> np.ndarray:
    P = np.zeros((p * q, p * q))
    for i in range(p):
        for j in range(q):
            # vec(Z)[i + j p] = Z[i, j] = Z^T[j, i] = vec(Z^T)[j + i q]
            P[j + i * q, i + j * p] = 1.0
    P.setflags(write=False)
    return P


def commutation_matrix(p: int, q: int) -> np.ndarray:
    """P_{p,q} with vec(Z^T) = P_{p,q} vec(Z) for Z ∈ R^{p×q}."""
    return _commutation_matrix_cached(p, q)


def kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.kron(A, B)


# ── SR decomposition ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SRFactors:
    S: np.ndarray
    R: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.S @ self.R


def _interleave_index(k: int) -> np.ndarray:
    # position p of the interleaved ordering holds original column perm[p]
    perm = np.empty(2 * k, dtype=int)
    perm[0::2] = np.arange(k)
    perm[1::2] = np.arange(k, 2 * k)
    return perm


def _omega(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Symplectic form u^T J v, column-wise when u is a matrix."""
    m = u.shape[0] // 2
    # J v = [v_bottom; −v_top]
    Jv = np.concatenate([v[m:], -v[:m]], axis=0)
    return u.T @ Jv


def sr_decompose(A: np.ndarray, breakdown_tol: float = config.SR_BREAKDOWN_TOL) -> SRFactors:
    """
    SR decomposition A = S R by modified symplectic Gram–Schmidt.

    Columns are processed in pairs (a_j, a_{k+j}); each pair is made
    symplectic-orthogonal to the pairs already built (two passes), then scaled
    so that r_{2j-1,2j-1} > 0, r_{2j-1,2j} = 0 and |r_{2j,2j}| = r_{2j-1,2j-1}
    in the interleaved ordering.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] % 2 or A.shape[1] % 2:
        raise DimensionError(f"SR decomposition needs a 2n×2k matrix, got {A.shape}")
    two_n, two_k = A.shape
    k = two_k // 2
    if two_k > two_n:
        raise DimensionError("SR decomposition needs k ≤ n")

    perm = _interleave_index(k)
    At = A[:, perm]
    St = np.zeros_like(At)
    Rt = np.zeros((two_k, two_k))
    threshold = breakdown_tol * max(float(np.linalg.norm(A)), np.finfo(float).tiny)

    for j in range(k):
        u = At[:, 2 * j].copy()
        v = At[:, 2 * j + 1].copy()
        if j > 0:
            E = St[:, 0:2 * j:2]
            F = St[:, 1:2 * j:2]
            for _ in range(2):
                for col, w in ((2 * j, u), (2 * j + 1, v)):
                    alpha = -_omega(F, w)
                    beta = _omega(E, w)
                    w -= E @ alpha + F @ beta
                    Rt[0:2 * j:2, col] += alpha
                    Rt[1:2 * j:2, col] += beta
        pivot = float(_omega(u, v))
        r = np.sqrt(abs(pivot))
        if r < threshold:
            raise SRBreakdownError(f"symplectic Gram–Schmidt breakdown at pair {j} (pivot {pivot:.3e})")
        r_second = pivot / r
        St[:, 2 * j] = u / r
        St[:, 2 * j + 1] = v / r_second
        Rt[2 * j, 2 * j] = r
        Rt[2 * j + 1, 2 * j + 1] = r_second

    inv = np.argsort(perm)
    S = St[:, inv]
    R = Rt[np.ix_(inv, inv)]
    return SRFactors(S=S, R=R)


def symplectic_factor(A: np.ndarray) -> np.ndarray:
    """sf(A): the S factor of the SR decomposition."""
    return sr_decompose(A).S


# ── Matrix Market I/O ─────────────────────────────────────────────────────────

PathLike = Union[str, Path]


def read_matrix(path: PathLike) -> np.ndarray:
    """Read a dense (array) or coordinate Matrix Market file as a dense array."""
    M = scipy.io.mmread(str(path))
    if scipy.sparse.issparse(M):
        M = M.toarray()
    return np.asarray(M, dtype=float)


def write_matrix(path: PathLike, A: Union[np.ndarray, scipy.sparse.spmatrix], comment: str = "") -> None:
    scipy.io.mmwrite(str(path), A, comment=comment)


def condition_estimate(A: np.ndarray) -> float:
    return float(np.linalg.cond(A))


def is_spd(A: np.ndarray, sym_tol: float = config.SPD_SYM_TOL) -> bool:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return False
    scale = max(float(np.linalg.norm(A)), np.finfo(float).tiny)
    if np.linalg.norm(A - A.T) > sym_tol * scale:
        return False
    try:
        scipy.linalg.cholesky(sym(A), lower=True)
    except np.linalg.LinAlgError:
        return False
    return True
