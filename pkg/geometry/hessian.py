"""
Riemannian Hessians on Sp(2k, 2n).

Canonical-like metric: closed form with every X_⊥ X_⊥^T occurrence replaced by
P_X P_X^T, plus the simplified k = n path. Euclidean and weighted Euclidean
metrics: Hess[Z] = M^{-1}(∇²f̄[Z] − J Z Ω − J X Θ) with two Lyapunov solves,
plus the explicit M = I reference path.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from geometry.errors import WrongMetricError
from geometry.linalg import skew, solve_lyapunov_spd, sym
from geometry.manifold import (
    SymplecticPoint,
    TangentVector,
    apply_J,
    apply_JT,
    as_array,
    check_tangent,
    poisson,
)
from geometry.metrics import CanonicalLikeMetric, EuclideanMetric, Metric, WeightedEuclideanMetric


class HessianOperator:
    """
    Hess f(X) for one (metric, point, cost) triple.

    Caches ∇f̄(X), grad f(X) and, for the (weighted) Euclidean metrics,
    Ω = Ω_{X, M^{-1}∇f̄(X)}. Applications are pure, so one operator may serve
    concurrent Krylov workers.
    """

    def __init__(self, metric: Metric, point: SymplecticPoint, cost, egrad: Optional[np.ndarray] = None):
        self.metric = metric
        self.point = point
        self.cost = cost
        self.egrad = cost.egrad(point.X) if egrad is None else egrad
        self.grad = metric.gradient(point, self.egrad)
        self.omega: Optional[np.ndarray] = None
        if not isinstance(metric, CanonicalLikeMetric):
            self.omega = metric.normal_multiplier(point, metric.minv_apply(point, self.egrad))

    @property
    def is_canonical(self) -> bool:
        return isinstance(self.metric, CanonicalLikeMetric)

    def apply(self, Z: np.ndarray) -> np.ndarray:
        if self.is_canonical:
            return _canonical_action(self, Z)
        return _weighted_action(self, Z)

    __call__ = apply

    def quadratic_form(self, Z: np.ndarray, U: np.ndarray) -> float:
        if self.is_canonical:
            return self.metric.inner(self.point, U, self.apply(Z))
        # ⟨U, J X Θ⟩ vanishes for tangent U, leaving tr(U^T(∇²f̄[Z] − J Z Ω))
        H = self.cost.ehess(self.point.X, Z)
        return float(np.sum(U * (H - apply_J(Z @ self.omega))))


# ── Canonical-like metric ─────────────────────────────────────────────────────

def _canonical_action(op: HessianOperator, Z: np.ndarray) -> np.ndarray:
    metric: CanonicalLikeMetric = op.metric
    point = op.point
    rho = metric.rho
    X, JX, G = point.X, point.JX, op.egrad
    H = op.cost.ehess(X, Z)

    XtG = X.T @ G
    JtXtG = apply_JT(XtG)          # J_{2k}^T X^T ∇f̄
    ZJ = apply_JT(Z.T).T           # Z J_{2k}
    PtG = point.apply_PT(G)        # P_X^T ∇f̄

    def skew_xjz(V: np.ndarray) -> np.ndarray:
        # skew(X J_{2k} Z^T) V
        return 0.5 * (X @ apply_J(Z.T @ V) - Z @ apply_JT(X.T @ V))

    # terms inside the closed-form projection
    t_hess = metric.minv_apply(point, H)
    t_rot = -rho * ZJ @ skew(JtXtG)
    WG = rho * X @ (Z.T @ G) - 2.0 * skew_xjz(apply_JT(PtG))
    WtG = rho * Z @ XtG + 2.0 * point.apply_P(apply_J(skew_xjz(G)))
    t_sym = WG + WtG
    t_x = rho * X @ sym((-JX.T @ Z) @ JtXtG.T - Z.T @ G)
    first = metric.project(point, t_hess + t_rot + t_sym + t_x)

    # terms inside the oblique projector
    a = point.apply_PT(apply_J(Z @ sym(JtXtG) + (PtG @ (Z.T @ JX)) / rho))
    b = -JX @ apply_J(sym(Z.T @ PtG))
    c = -Z @ skew(apply_J(X.T @ apply_J(PtG)) + rho * apply_J(sym(JtXtG)))
    d = -PtG @ skew(point.gram_inv @ (X.T @ Z))
    second = point.apply_P(a + b + c + d)
    return first + second


def hess_canonical(op: HessianOperator, Z) -> TangentVector:
    if not op.is_canonical:
        raise WrongMetricError(f"hess_canonical needs a canonical-like metric, got {op.metric!r}")
    Z = as_array(Z)
    check_tangent(op.point, Z)
    return TangentVector(op.point, _canonical_action(op, Z))


def hess_canonical_full_rank(op: HessianOperator, Z) -> TangentVector:
    """k = n path: P_X vanishes and only the first projected block survives."""
    if not op.is_canonical:
        raise WrongMetricError("full-rank canonical path needs a canonical-like metric")
    point = op.point
    if point.k != point.n:
        raise WrongMetricError("full-rank canonical path needs k = n")
    Z = as_array(Z)
    rho = op.metric.rho
    X, G = point.X, op.egrad
    J = poisson(point.n)
    J2 = poisson(point.k)
    H = op.cost.ehess(X, Z)

    Minv = rho * X @ X.T
    inner = (
        Minv @ H
        - rho * Z @ J2 @ skew(J2.T @ X.T @ G)
        + 2.0 * rho * sym(X @ Z.T) @ G
        + rho * X @ sym(X.T @ J @ Z @ G.T @ X @ J2 - Z.T @ G)
    )
    projected = inner - X @ J2 @ skew(X.T @ J.T @ inner)
    return TangentVector(point, projected)


# ── (Weighted) Euclidean metrics ──────────────────────────────────────────────

def _weighted_action(op: HessianOperator, Z: np.ndarray) -> np.ndarray:
    metric, point = op.metric, op.point
    H = op.cost.ehess(point.X, Z)
    Y = metric.minv_apply(point, H - apply_J(Z @ op.omega))
    Theta = metric.lyapunov(point).solve(2.0 * skew(point.JX.T @ Y), skew_output=True)
    return Y - metric.normal_factor(point) @ Theta


def hess_weighted(op: HessianOperator, Z) -> TangentVector:
    if op.is_canonical:
        raise WrongMetricError("hess_weighted needs a Euclidean or weighted Euclidean metric")
    Z = as_array(Z)
    check_tangent(op.point, Z)
    return TangentVector(op.point, _weighted_action(op, Z))


def hess_euclidean_reference(op: HessianOperator, Z) -> TangentVector:
    """M = I with both Lyapunov equations written out in dense matrices."""
    if not isinstance(op.metric, EuclideanMetric):
        raise WrongMetricError("Euclidean reference path needs the Euclidean metric")
    point = op.point
    Z = as_array(Z)
    X, G = point.X, op.egrad
    J = poisson(point.n)
    H = op.cost.ehess(X, Z)
    XtX = X.T @ X
    Omega = solve_lyapunov_spd(XtX, 2.0 * skew(X.T @ J.T @ G))
    Theta = solve_lyapunov_spd(XtX, 2.0 * skew(X.T @ J.T @ H - X.T @ Z @ Omega))
    return TangentVector(point, H - J @ Z @ Omega - J @ X @ Theta)


# ── Bilinear form ─────────────────────────────────────────────────────────────

def hess_quadratic_form(op: HessianOperator, Z, U) -> float:
    """Hess f(X)[Z, U] = g(U, Hess f(X)[Z])."""
    return op.quadratic_form(as_array(Z), as_array(U))


def hessian_operator(metric: Metric, point: SymplecticPoint, cost) -> HessianOperator:
    if not isinstance(metric, (CanonicalLikeMetric, EuclideanMetric, WeightedEuclideanMetric)):
        raise WrongMetricError(f"no Hessian formula for {metric!r}")
    return HessianOperator(metric, point, cost)
