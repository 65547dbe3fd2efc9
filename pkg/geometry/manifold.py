"""
The symplectic Stiefel manifold Sp(2k, 2n).

Points, tangent vectors, the Poisson matrix J, the oblique projector P_X and
the complement frame X_⊥.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional

import numpy as np
import scipy.linalg

import config
from geometry.errors import DimensionError, FrameError, InvariantError, SRBreakdownError
from geometry.linalg import is_skew, sr_decompose, sym


# ── Poisson matrix ────────────────────────────────────────────────────────────

def poisson(m: int) -> np.ndarray:
    """J_{2m} = [0 I; −I 0], materialized."""
    I = np.eye(m)
    Z = np.zeros((m, m))
    return np.block([[Z, I], [-I, Z]])


def _half_rows(A: np.ndarray) -> int:
    if A.shape[0] % 2:
        raise DimensionError(f"J needs an even row count, got {A.shape[0]}")
    return A.shape[0] // 2


def apply_J(A: np.ndarray) -> np.ndarray:
    """J_{2m} A by block row swap: [A_bottom; −A_top]."""
    m = _half_rows(A)
    return np.concatenate([A[m:], -A[:m]], axis=0)


def apply_JT(A: np.ndarray) -> np.ndarray:
    """J_{2m}^T A = [−A_bottom; A_top]."""
    m = _half_rows(A)
    return np.concatenate([-A[m:], A[:m]], axis=0)


def feasibility(X: np.ndarray) -> float:
    """‖X^T J_{2n} X − J_{2k}‖_F."""
    X = np.asarray(X, dtype=float)
    k = _half_rows(X.T)
    return float(np.linalg.norm(X.T @ apply_J(X) - poisson(k)))


# ── Dimensions ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ManifoldDims:
    n: int
    k: int

    def __post_init__(self):
        if not (1 <= self.k <= self.n):
            raise DimensionError(f"need 1 ≤ k ≤ n, got n={self.n}, k={self.k}")

    @property
    def dim(self) -> int:
        return 4 * self.n * self.k - self.k * (2 * self.k - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (2 * self.n, 2 * self.k)

    @property
    def ambient_size(self) -> int:
        """4nk, the length of vec(X)."""
        return 4 * self.n * self.k

    @classmethod
    def of(cls, X: np.ndarray) -> "ManifoldDims":
        if X.ndim != 2 or X.shape[0] % 2 or X.shape[1] % 2:
            raise DimensionError(f"expected a 2n×2k matrix, got {X.shape}")
        return cls(n=X.shape[0] // 2, k=X.shape[1] // 2)


# ── Points ────────────────────────────────────────────────────────────────────

class SymplecticPoint:
    """
    A feasible X ∈ Sp(2k, 2n) with cached derived quantities.

    X^T X, J X and (X^T X)^{-1} are computed on construction; P_X, X_⊥ and
    metric-specific data (Lyapunov solvers, M^{-1} J X) are built lazily under
    a reentrant lock (builders may look up other cached entries) and reused
    for the lifetime of the point.
    """

    def __init__(
        self,
        X: np.ndarray,
        feas_tol: float = config.FEAS_TOL,
        check: bool = True,
        repaired: bool = False,
    ):
        X = np.array(X, dtype=float)
        self.dims = ManifoldDims.of(X)
        X.setflags(write=False)
        self.X = X
        self.feas = feasibility(X)
        if check and self.feas > feas_tol:
            raise InvariantError(f"point is not symplectic: feasibility {self.feas:.3e} > {feas_tol:.1e}")
        self.repaired = repaired
        self.gram = X.T @ X
        self.JX = apply_J(X)
        self.gram_inv = scipy.linalg.inv(self.gram)
        self._lock = threading.RLock()
        self._cache: Dict[Any, Any] = {}

    @property
    def n(self) -> int:
        return self.dims.n

    @property
    def k(self) -> int:
        return self.dims.k

    def cached(self, key: Any, factory: Callable[[], Any]) -> Any:
        with self._lock:
            if key not in self._cache:
                self._cache[key] = factory()
            return self._cache[key]

    # ── Oblique projector P_X = I − X J_{2k} X^T J^T ──────────────────────────

    def apply_P(self, Y: np.ndarray) -> np.ndarray:
        # X J_{2k} X^T J^T Y = X J_{2k} (JX)^T Y
        return Y - self.X @ apply_J(self.JX.T @ Y)

    def apply_PT(self, Y: np.ndarray) -> np.ndarray:
        # P_X^T = I − J X J_{2k}^T X^T
        return Y - self.JX @ apply_JT(self.X.T @ Y)

    def apply_PPT(self, Y: np.ndarray) -> np.ndarray:
        return self.apply_P(self.apply_PT(Y))

    @property
    def oblique_projector(self) -> np.ndarray:
        return self.cached("P_X", lambda: self.apply_P(np.eye(2 * self.n)))

    def apply_orth_complement(self, Y: np.ndarray) -> np.ndarray:
        """Π_X^⊥ Y = Y − X (X^T X)^{-1} X^T Y."""
        return Y - self.X @ (self.gram_inv @ (self.X.T @ Y))

    def __repr__(self) -> str:
        return f"SymplecticPoint(n={self.n}, k={self.k}, feas={self.feas:.2e})"


def as_point(X: Any) -> SymplecticPoint:
    return X if isinstance(X, SymplecticPoint) else SymplecticPoint(X)


def canonical_point(dims: ManifoldDims) -> SymplecticPoint:
    """[I_{n,k} 0; 0 I_{n,k}]."""
    n, k = dims.n, dims.k
    X = np.zeros((2 * n, 2 * k))
    X[:k, :k] = np.eye(k)
    X[n:n + k, k:] = np.eye(k)
    return SymplecticPoint(X)


def random_point(
    dims: ManifoldDims,
    seed: Optional[int | np.random.Generator] = None,
    retries: int = config.RANDOM_POINT_RETRIES,
) -> SymplecticPoint:
    """Symplectic factor of a standard normal 2n×2k draw; deterministic per seed."""
    rng = np.random.default_rng(seed)
    last: Optional[Exception] = None
    for _ in range(retries):
        try:
            S = sr_decompose(rng.standard_normal(dims.shape)).S
            return SymplecticPoint(S, feas_tol=config.RETRACTION_FEAS_TOL)
        except (SRBreakdownError, InvariantError) as exc:
            last = exc
    raise SRBreakdownError(f"random_point failed after {retries} draws") from last


# ── Tangent vectors ───────────────────────────────────────────────────────────

def dfx(point: SymplecticPoint, Z: np.ndarray) -> np.ndarray:
    """D F_X(Z) = X^T J Z + Z^T J X."""
    W = point.X.T @ apply_J(Z)
    return W - W.T


def dfx_adjoint(point: SymplecticPoint, Omega: np.ndarray) -> np.ndarray:
    """D F_X^*(Ω) = 2 J^T X Ω."""
    if not is_skew(Omega):
        raise InvariantError("dfx_adjoint expects a skew-symmetric Ω")
    return -2.0 * point.JX @ Omega


def tangency_residual(point: SymplecticPoint, Z: np.ndarray) -> float:
    return float(np.linalg.norm(dfx(point, Z)))


def is_tangent(point: SymplecticPoint, Z: np.ndarray, tol: float = config.TANGENCY_TOL) -> bool:
    return tangency_residual(point, Z) <= tol * (1.0 + float(np.linalg.norm(Z)))


@dataclass(frozen=True)
class TangentVector:
    base: SymplecticPoint
    Z: np.ndarray

    def __post_init__(self):
        if self.Z.shape != self.base.X.shape:
            raise DimensionError(f"tangent shape {self.Z.shape} != point shape {self.base.X.shape}")
        if config.DEBUG_CHECKS and not is_tangent(self.base, self.Z):
            raise InvariantError(
                f"not tangent: residual {tangency_residual(self.base, self.Z):.3e}"
            )

    @property
    def residual(self) -> float:
        return tangency_residual(self.base, self.Z)

    def norm_fro(self) -> float:
        return float(np.linalg.norm(self.Z))


def as_array(Z: Any) -> np.ndarray:
    return Z.Z if isinstance(Z, TangentVector) else np.asarray(Z, dtype=float)


def check_tangent(point: SymplecticPoint, Z: np.ndarray) -> None:
    """Raise InvariantError for non-tangent input when debug checks are on."""
    if config.DEBUG_CHECKS and not is_tangent(point, Z):
        raise InvariantError(f"not tangent: residual {tangency_residual(point, Z):.3e}")


# ── Complement frame and tangent parameterization ─────────────────────────────

def xperp_frame(point: SymplecticPoint) -> np.ndarray:
    """
    X_⊥ with X^T X_⊥ = 0, normalized so that X_⊥ (X_⊥^T J X_⊥)^{-1} has
    orthonormal columns. Only oracle code needs it.
    """
    def build() -> np.ndarray:
        n, k = point.n, point.k
        if k == n:
            return np.zeros((2 * n, 0))
        Q, _ = scipy.linalg.qr(point.X, mode="full")
        Qp = Q[:, 2 * k:]
        H = Qp.T @ apply_J(Qp)
        # X_⊥ = Q_⊥ T with T T^T = (H H^T)^{-1}
        evals, V = np.linalg.eigh(sym(H @ H.T))
        if evals[0] <= np.finfo(float).eps * max(evals[-1], 1.0):
            raise FrameError("complement frame is rank deficient")
        T = (V / np.sqrt(evals)) @ V.T
        return Qp @ T

    return point.cached("X_perp", build)


def tangent_from_parameters(point: SymplecticPoint, W: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Z = X J_{2k} W + J_{2n} X_⊥ K with W symmetric."""
    return point.X @ apply_J(sym(W)) + apply_J(xperp_frame(point) @ K)


def random_tangent(point: SymplecticPoint, rng: np.random.Generator) -> np.ndarray:
    """Tangent vector with Gaussian parameters, normalized to unit Frobenius norm."""
    k2 = 2 * point.k
    W = rng.standard_normal((k2, k2))
    K = rng.standard_normal((2 * point.n - k2, k2))
    Z = tangent_from_parameters(point, W, K)
    return Z / np.linalg.norm(Z)
