"""
Tractable metrics g_X(Z1, Z2) = ⟨Z1, M_X Z2⟩ on Sp(2k, 2n).

Three concrete families are shipped:

  CanonicalLikeMetric(ρ)  M_X = (1/ρ) J X X^T J^T + Π_X^⊥, never materialized
  EuclideanMetric         M_X = I
  WeightedEuclideanMetric M_X = M, a constant spd matrix (one Cholesky per run)

Every metric exposes M_X, M_X^{-1}, the normal factor M_X^{-1} J X and the
Lyapunov coefficient X^T J^T M_X^{-1} J X; the orthogonal projection and the
Riemannian gradient are derived from those.
"""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from typing import Any

import numpy as np
import scipy.linalg

import config
from geometry.errors import ConfigError, DefinitenessError, DimensionError
from geometry.linalg import LyapunovSolver, skew, sym
from geometry.manifold import (
    SymplecticPoint,
    TangentVector,
    apply_J,
    apply_JT,
    as_array,
    as_point,
    check_tangent,
)


class Metric(ABC):
    """Base class; subclasses supply M_X, M_X^{-1} and the normal factor."""

    label: str = ""

    # ── Metric-specific pieces ────────────────────────────────────────────────

    @abstractmethod
    def m_apply(self, point: SymplecticPoint, Y: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def minv_apply(self, point: SymplecticPoint, Y: np.ndarray) -> np.ndarray:
        ...

    def _compute_normal_factor(self, point: SymplecticPoint) -> np.ndarray:
        return self.minv_apply(point, point.JX)

    # ── Cached per point ──────────────────────────────────────────────────────

    @property
    def cache_key(self) -> Any:
        return (type(self).__name__, self)

    def normal_factor(self, point: SymplecticPoint) -> np.ndarray:
        """N = M_X^{-1} J X; the normal space is {N Ω : Ω skew}."""
        return point.cached((self.cache_key, "N"), lambda: self._compute_normal_factor(point))

    def lyapunov(self, point: SymplecticPoint) -> LyapunovSolver:
        """Solver for the coefficient X^T J^T M_X^{-1} J X."""
        def build() -> LyapunovSolver:
            C = sym(point.JX.T @ self.normal_factor(point))
            try:
                return LyapunovSolver(C)
            except DefinitenessError as exc:
                raise DefinitenessError(f"{self!r}: Lyapunov coefficient is indefinite") from exc

        return point.cached((self.cache_key, "lyap"), build)

    # ── Inner product ─────────────────────────────────────────────────────────

    def inner(self, point: SymplecticPoint, Z1: np.ndarray, Z2: np.ndarray) -> float:
        check_tangent(point, Z1)
        check_tangent(point, Z2)
        return float(np.sum(Z1 * self.m_apply(point, Z2)))

    def norm(self, point: SymplecticPoint, Z: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(point, Z, Z), 0.0)))

    # ── Projection and gradient ───────────────────────────────────────────────

    def normal_multiplier(self, point: SymplecticPoint, Y: np.ndarray) -> np.ndarray:
        """Ω_{X,Y}: the skew solution of Lyap(Ω) = 2 skew(X^T J^T Y)."""
        return self.lyapunov(point).solve(2.0 * skew(point.JX.T @ Y), skew_output=True)

    def project(self, point: SymplecticPoint, Y: np.ndarray) -> np.ndarray:
        return Y - self.normal_factor(point) @ self.normal_multiplier(point, Y)

    def gradient(self, point: SymplecticPoint, egrad: np.ndarray) -> np.ndarray:
        return self.project(point, self.minv_apply(point, egrad))


class CanonicalLikeMetric(Metric):
    label = "c"

    def __init__(self, rho: float = config.RHO):
        if not rho > 0:
            raise DefinitenessError(f"canonical-like metric needs ρ > 0, got {rho}")
        self.rho = float(rho)

    def __repr__(self) -> str:
        return f"CanonicalLikeMetric(rho={self.rho:g})"

    @property
    def cache_key(self) -> Any:
        return ("canonical", self.rho)

    def m_apply(self, point, Y):
        JX = point.JX
        return (JX @ (JX.T @ Y)) / self.rho + point.apply_orth_complement(Y)

    def minv_apply(self, point, Y):
        return self.rho * (point.X @ (point.X.T @ Y)) + point.apply_PPT(Y)

    def _compute_normal_factor(self, point):
        # M^{-1} J X = ρ X J_{2k}
        return self.rho * apply_JT(point.X.T).T

    def normal_multiplier(self, point, Y):
        return skew(point.JX.T @ Y) / self.rho

    def project(self, point, Y):
        # ρ-independent closed form Y − X J_{2k} skew(X^T J^T Y)
        return Y - point.X @ apply_J(skew(point.JX.T @ Y))

    def gradient(self, point, egrad):
        inner = sym(apply_JT(point.X.T @ egrad))
        return self.rho * (point.X @ apply_J(inner)) + point.apply_PPT(egrad)

    def explicit_matrix(self, point: SymplecticPoint) -> np.ndarray:
        """Dense M_{X,c,ρ}; oracle use only."""
        I = np.eye(2 * point.n)
        return (point.JX @ point.JX.T) / self.rho + point.apply_orth_complement(I)


class EuclideanMetric(Metric):
    label = "e"

    def __repr__(self) -> str:
        return "EuclideanMetric()"

    @property
    def cache_key(self) -> Any:
        return ("euclidean",)

    def m_apply(self, point, Y):
        return Y

    def minv_apply(self, point, Y):
        return Y

    def _compute_normal_factor(self, point):
        return point.JX


class WeightedEuclideanMetric(Metric):
    label = "M"

    def __init__(self, M: np.ndarray):
        M = np.array(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
            raise DimensionError(f"weight must be a square 2n×2n matrix, got {M.shape}")
        scale = max(float(np.linalg.norm(M)), np.finfo(float).tiny)
        if np.linalg.norm(M - M.T) > config.SPD_SYM_TOL * scale:
            raise DefinitenessError("weight matrix is not symmetric")
        try:
            self._factor = scipy.linalg.cho_factor(sym(M), lower=True)
        except np.linalg.LinAlgError as exc:
            raise DefinitenessError("weight matrix is not positive definite") from exc
        M.setflags(write=False)
        self.M = M
        self._digest = hashlib.sha1(M.tobytes()).hexdigest()

    def __repr__(self) -> str:
        return f"WeightedEuclideanMetric(size={self.M.shape[0]})"

    @property
    def cache_key(self) -> Any:
        return ("weighted", self.M.shape[0], self._digest)

    def m_apply(self, point, Y):
        return self.M @ Y

    def minv_apply(self, point, Y):
        return scipy.linalg.cho_solve(self._factor, Y)


# ── Functional surface ────────────────────────────────────────────────────────

def inner(metric: Metric, X, Z1, Z2) -> float:
    return metric.inner(as_point(X), as_array(Z1), as_array(Z2))


def norm(metric: Metric, X, Z) -> float:
    return metric.norm(as_point(X), as_array(Z))


def minv_apply(metric: Metric, X, Y) -> np.ndarray:
    return metric.minv_apply(as_point(X), np.asarray(Y, dtype=float))


def project_tangent(metric: Metric, X, Y) -> TangentVector:
    point = as_point(X)
    return TangentVector(point, metric.project(point, np.asarray(Y, dtype=float)))


def riemannian_gradient(metric: Metric, X, cost) -> TangentVector:
    point = as_point(X)
    return TangentVector(point, metric.gradient(point, cost.egrad(point.X)))


def make_metric(token: str, weight: np.ndarray | None = None) -> Metric:
    """Build a metric from a scheme token: 'c', 'c(ρ)', 'e' or 'M'."""
    token = token.strip()
    if token == "e":
        return EuclideanMetric()
    if token == "M":
        if weight is None:
            raise ConfigError("metric 'M' needs a constant Hessian matrix from the cost")
        return WeightedEuclideanMetric(weight)
    if token == "c":
        return CanonicalLikeMetric()
    if token.startswith("c(") and token.endswith(")"):
        try:
            rho = float(token[2:-1])
        except ValueError:
            raise ConfigError(f"bad ρ in metric token {token!r}") from None
        return CanonicalLikeMetric(rho)
    raise ConfigError(f"unknown metric token {token!r}")
