"""
Closed-form directional derivatives of the metric machinery next to their
central finite-difference counterparts along t ↦ sf(X + tZ).

Test and acceptance code only: every quantity here is cheap for n ≤ 6 and
grows quickly beyond that (the index-raising map walks a full tangent basis).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
import scipy.linalg

import config
from geometry.linalg import skew, sr_decompose, sym, unvec, veck
from geometry.manifold import SymplecticPoint, apply_J, apply_JT, as_array, as_point, dfx, random_tangent
from geometry.metrics import CanonicalLikeMetric, EuclideanMetric, Metric, WeightedEuclideanMetric


@dataclass
class OraclePair:
    name: str
    closed_form: np.ndarray
    finite_difference: np.ndarray

    @property
    def rel_error(self) -> float:
        scale = max(np.linalg.norm(self.closed_form), np.linalg.norm(self.finite_difference), 1e-300)
        return float(np.linalg.norm(self.closed_form - self.finite_difference) / scale)


@dataclass
class OracleBundle:
    pairs: Dict[str, OraclePair] = field(default_factory=dict)

    def add(self, pair: OraclePair) -> None:
        self.pairs[pair.name] = pair

    def __getitem__(self, name: str) -> OraclePair:
        return self.pairs[name]

    @property
    def worst(self) -> float:
        return max((p.rel_error for p in self.pairs.values()), default=0.0)

    def to_dict(self) -> dict:
        return {name: p.rel_error for name, p in self.pairs.items()}


# ── Curves and differences ────────────────────────────────────────────────────

def fd_step(point: SymplecticPoint, Z: np.ndarray) -> float:
    return config.FD_STEP * max(float(np.linalg.norm(point.X)), 1.0) / float(np.linalg.norm(Z))


def curve_point(point: SymplecticPoint, Z: np.ndarray, t: float) -> SymplecticPoint:
    return SymplecticPoint(sr_decompose(point.X + t * Z).S, check=False)


def central_difference(
    fn: Callable[[SymplecticPoint], np.ndarray],
    point: SymplecticPoint,
    Z: np.ndarray,
    step: Optional[float] = None,
) -> np.ndarray:
    h = fd_step(point, Z) if step is None else step
    return (fn(curve_point(point, Z, h)) - fn(curve_point(point, Z, -h))) / (2.0 * h)


def tangent_basis(point: SymplecticPoint) -> list[np.ndarray]:
    """Euclidean-orthonormal basis of T_X Sp(2k, 2n) as a list of 2n×2k matrices."""
    rows, cols = point.X.shape
    L = np.empty((point.k * (2 * point.k - 1), rows * cols))
    for idx in range(rows * cols):
        E = np.zeros(rows * cols)
        E[idx] = 1.0
        L[:, idx] = veck(dfx(point, unvec(E, rows, cols)), tol=1e-8)
    N = scipy.linalg.null_space(L)
    return [unvec(N[:, j], rows, cols) for j in range(N.shape[1])]


# ── Canonical-like metric: closed forms ───────────────────────────────────────

def projection_derivative_canonical(point: SymplecticPoint, Z: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """D_Z P_X(Y) = −X J_{2k} skew(Z^T J^T Y) − Z J_{2k} skew(X^T J^T Y)."""
    X = point.X
    return -X @ apply_J(skew(apply_J(Z).T @ Y)) - apply_JT(Z.T).T @ skew(point.JX.T @ Y)


def metric_derivative_canonical(point: SymplecticPoint, Z: np.ndarray, rho: float) -> np.ndarray:
    """D_Z M_{X,c,ρ} = 2 sym((1/ρ) J X Z^T J^T − Π^⊥ Z (X^T X)^{-1} X^T)."""
    JZ = apply_J(Z)
    A = (point.JX @ JZ.T) / rho - point.apply_orth_complement(Z) @ point.gram_inv @ point.X.T
    return 2.0 * sym(A)


def index_raising_canonical(point: SymplecticPoint, Z: np.ndarray, U: np.ndarray, rho: float) -> np.ndarray:
    X = point.X
    S = sym(U @ Z.T)
    return (2.0 / rho) * apply_JT(S @ point.JX) - 2.0 * point.apply_orth_complement(S @ X @ point.gram_inv)


def k_map_canonical(point: SymplecticPoint, Z: np.ndarray, U: np.ndarray, rho: float) -> np.ndarray:
    X, Gi = point.X, point.gram_inv
    JX = point.JX
    first = apply_J(X @ skew(apply_J(Z).T @ U) + 2.0 * sym(Z @ U.T) @ JX) / rho
    PU = point.apply_orth_complement(U)
    PZ = point.apply_orth_complement(Z)
    return (
        first
        - PU @ skew(Gi @ (X.T @ Z))
        - PZ @ skew(Gi @ (X.T @ U))
        - X @ Gi @ sym(Z.T @ PU)
    )


# ── Canonical-like metric: finite differences ─────────────────────────────────

def metric_derivative_fd(metric: CanonicalLikeMetric, point: SymplecticPoint, Z: np.ndarray) -> np.ndarray:
    return central_difference(metric.explicit_matrix, point, Z)


def index_raising_fd(metric: CanonicalLikeMetric, point: SymplecticPoint, Z: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Tangent representative of 𝒳(Z, U) from ⟨𝒳, V_i⟩ = ⟨Z, D_{V_i} M (U)⟩."""
    out = np.zeros_like(Z)
    for V in tangent_basis(point):
        dM = metric_derivative_fd(metric, point, V)
        out += float(np.sum(Z * (dM @ U))) * V
    return out


def k_map_fd(metric: CanonicalLikeMetric, point: SymplecticPoint, Z: np.ndarray, U: np.ndarray) -> np.ndarray:
    dMZ = metric_derivative_fd(metric, point, Z) @ U
    dMU = metric_derivative_fd(metric, point, U) @ Z
    return 0.5 * (dMZ + dMU - index_raising_fd(metric, point, Z, U))


# ── Weighted Euclidean metric ─────────────────────────────────────────────────

def projection_derivative_weighted(metric: Metric, point: SymplecticPoint, Z: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """D_Z P_X(Y) = −M^{-1} J (Z Ω + X Ξ) for a constant weight M."""
    Omega = metric.normal_multiplier(point, Y)
    C_dot = 2.0 * sym(point.JX.T @ metric.minv_apply(point, apply_J(Z)))
    rhs = 2.0 * skew(apply_J(Z).T @ Y - C_dot @ Omega)
    Xi = metric.lyapunov(point).solve(rhs, skew_output=True)
    return -metric.minv_apply(point, apply_J(Z @ Omega + point.X @ Xi))


# ── Hessian assembled from the general operator formula ───────────────────────

def hess_fd_assembly(metric: Metric, X, cost, Z) -> np.ndarray:
    """
    P(M^{-1}∇²f̄[Z] + D_Z P(M^{-1}∇f̄) − M^{-1} D_Z M(M^{-1}∇f̄) + M^{-1} K(Z, grad))
    with D_Z P, D_Z M and 𝒳 taken by finite differences.
    """
    point = as_point(X)
    Z = as_array(Z)
    G = cost.egrad(point.X)
    Y0 = metric.minv_apply(point, G)
    total = metric.minv_apply(point, cost.ehess(point.X, Z))
    total = total + central_difference(lambda p: metric.project(p, Y0), point, Z)
    if isinstance(metric, CanonicalLikeMetric):
        grad = metric.gradient(point, G)
        dM = metric_derivative_fd(metric, point, Z)
        total = total - metric.minv_apply(point, dM @ Y0)
        total = total + metric.minv_apply(point, k_map_fd(metric, point, Z, grad))
    return metric.project(point, total)


# ── Bundle ────────────────────────────────────────────────────────────────────

def _random_spd(size: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.standard_normal((size, size))
    return A @ A.T / size + np.eye(size)


def fd_directional_derivative_oracles(
    X,
    Z,
    rho: float = config.RHO,
    weight: Optional[np.ndarray] = None,
    seed: Optional[int] = None,
) -> OracleBundle:
    """(closed form, finite difference) pairs for every derivative lemma at (X, Z)."""
    point = as_point(X)
    Z = as_array(Z)
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal(point.X.shape)
    U = random_tangent(point, rng)
    canonical = CanonicalLikeMetric(rho)
    bundle = OracleBundle()

    bundle.add(OraclePair(
        "projection_derivative",
        projection_derivative_canonical(point, Z, Y),
        central_difference(lambda p: canonical.project(p, Y), point, Z),
    ))
    bundle.add(OraclePair(
        "metric_derivative",
        metric_derivative_canonical(point, Z, rho),
        metric_derivative_fd(canonical, point, Z),
    ))
    # 𝒳 is pinned down only up to Euclidean-normal terms: compare tangent parts
    euclidean = EuclideanMetric()
    bundle.add(OraclePair(
        "index_raising",
        euclidean.project(point, index_raising_canonical(point, Z, U, rho)),
        index_raising_fd(canonical, point, Z, U),
    ))
    bundle.add(OraclePair(
        "k_map",
        canonical.project(point, canonical.minv_apply(point, k_map_canonical(point, Z, U, rho))),
        canonical.project(point, canonical.minv_apply(point, k_map_fd(canonical, point, Z, U))),
    ))

    M = _random_spd(point.X.shape[0], rng) if weight is None else weight
    weighted = WeightedEuclideanMetric(M)
    bundle.add(OraclePair(
        "weighted_projection_derivative",
        projection_derivative_weighted(weighted, point, Z, Y),
        central_difference(lambda p: weighted.project(p, Y), point, Z),
    ))
    return bundle
