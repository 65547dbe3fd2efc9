"""
Cost functions on Sp(2k, 2n) and the problem record the optimizers consume.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

import config
from geometry.errors import DefinitenessError, DimensionError
from geometry.linalg import condition_estimate, is_spd
from geometry.manifold import ManifoldDims, SymplecticPoint, apply_J, apply_JT, feasibility


class CostFunction(ABC):
    """f(X) with the ambient gradient and Hessian action of a smooth extension."""

    name: str = "cost"

    @abstractmethod
    def value(self, X: np.ndarray) -> float:
        ...

    @abstractmethod
    def egrad(self, X: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def ehess(self, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
        ...

    @property
    def constant_hessian_matrix(self) -> Optional[np.ndarray]:
        """M with ∇²f̄(X)[Z] = M Z for every X, when such an M exists."""
        return None

    def __call__(self, X: np.ndarray) -> float:
        return self.value(X)


class LeastSquaresCost(CostFunction):
    """f(X) = ½‖AX − B‖²_F."""

    name = "least_squares"

    def __init__(self, A: np.ndarray, B: np.ndarray):
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.AtA = self.A.T @ self.A
        self.AtB = self.A.T @ self.B

    def value(self, X):
        R = self.A @ X - self.B
        return 0.5 * float(np.sum(R * R))

    def egrad(self, X):
        return self.AtA @ X - self.AtB

    def ehess(self, X, Z):
        return self.AtA @ Z

    @property
    def constant_hessian_matrix(self):
        return self.AtA


class TraceCost(CostFunction):
    """f(X) = ½ tr(X^T A X)."""

    name = "trace"

    def __init__(self, A: np.ndarray):
        self.A = np.asarray(A, dtype=float)

    def value(self, X):
        return 0.5 * float(np.sum(X * (self.A @ X)))

    def egrad(self, X):
        return self.A @ X

    def ehess(self, X, Z):
        return self.A @ Z

    @property
    def constant_hessian_matrix(self):
        return self.A


class QuarticTraceCost(CostFunction):
    """f(X) = ½ tr(X^T A X X^T B X), square case k = n."""

    name = "quartic"

    def __init__(self, A: np.ndarray, B: np.ndarray):
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)

    def value(self, X):
        return 0.5 * float(np.trace((X.T @ self.A @ X) @ (X.T @ self.B @ X)))

    def egrad(self, X):
        AX, BX = self.A @ X, self.B @ X
        return BX @ (X.T @ AX) + AX @ (X.T @ BX)

    def ehess(self, X, Z):
        A, B = self.A, self.B
        AX, BX = A @ X, B @ X
        AZ, BZ = A @ Z, B @ Z
        return (
            BZ @ (X.T @ AX)
            + AZ @ (X.T @ BX)
            + BX @ (Z.T @ AX)
            + BX @ (AX.T @ Z)
            + AX @ (BX.T @ Z)
            + AX @ (Z.T @ BX)
        )


# ── Problem record ────────────────────────────────────────────────────────────

@dataclass
class Problem:
    name: str
    cost: CostFunction
    dims: ManifoldDims
    x0: Optional[SymplecticPoint] = None
    known_minimizer: Optional[np.ndarray] = None
    f_min: Optional[float] = None
    label: str = ""
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def metric_weight(self) -> Optional[np.ndarray]:
        return self.cost.constant_hessian_matrix

    def rel_dist_to_known_min(self, X: np.ndarray) -> Optional[float]:
        if self.known_minimizer is None:
            return None
        return float(np.linalg.norm(X - self.known_minimizer) / np.linalg.norm(self.known_minimizer))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "label": self.label or self.name,
            "n": self.dims.n,
            "k": self.dims.k,
            "f_min": self.f_min,
            "has_known_minimizer": self.known_minimizer is not None,
            **self.metadata,
        }


def _square_even(A: np.ndarray, what: str) -> int:
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 2:
        raise DimensionError(f"{what} must be 2n×2n, got {A.shape}")
    return A.shape[0] // 2


def _is_symplectic(M: np.ndarray) -> bool:
    return feasibility(M) <= config.FEAS_TOL * max(1.0, float(np.linalg.norm(M)) ** 2)


def least_squares_problem(
    A: np.ndarray,
    B: np.ndarray,
    x0: Optional[SymplecticPoint] = None,
    name: str = "least_squares",
) -> Problem:
    """
    f(X) = ½‖AX − B‖²_F. When A and B are both symplectic the unique
    minimizer X_min = J^T A^T J B is recorded.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = _square_even(A, "A")
    if B.shape[0] != 2 * n or B.shape[1] % 2:
        raise DimensionError(f"B must be 2n×2k with 2n={2 * n}, got {B.shape}")
    if condition_estimate(A) > config.SINGULAR_COND:
        raise DefinitenessError("least-squares matrix A is singular")
    dims = ManifoldDims(n=n, k=B.shape[1] // 2)

    known, f_min = None, None
    if _is_symplectic(A) and _is_symplectic(B):
        known = apply_JT(A.T @ apply_J(B))
        f_min = 0.0
    return Problem(name=name, cost=LeastSquaresCost(A, B), dims=dims, x0=x0, known_minimizer=known, f_min=f_min)


def trace_problem(
    A: np.ndarray,
    k: int,
    x0: Optional[SymplecticPoint] = None,
    f_min: Optional[float] = None,
    name: str = "trace",
) -> Problem:
    A = np.asarray(A, dtype=float)
    n = _square_even(A, "A")
    if not is_spd(A):
        raise DefinitenessError("trace problem needs an spd matrix A")
    return Problem(name=name, cost=TraceCost(A), dims=ManifoldDims(n=n, k=k), x0=x0, f_min=f_min)


def quartic_trace_problem(
    A: np.ndarray,
    B: np.ndarray,
    x0: Optional[SymplecticPoint] = None,
    name: str = "quartic",
) -> Problem:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = _square_even(A, "A")
    if B.shape != A.shape:
        raise DimensionError("A and B must have the same shape")
    if not (is_spd(A) and is_spd(B)):
        raise DefinitenessError("quartic problem needs spd A and B")
    dims = ManifoldDims(n=n, k=n)
    if x0 is not None and x0.k != n:
        raise DimensionError("quartic problem is square: k must equal n")
    return Problem(name=name, cost=QuarticTraceCost(A, B), dims=dims, x0=x0)
