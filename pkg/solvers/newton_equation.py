"""
Solvers for the Riemannian Newton equation Hess f(X)[Z] = −grad f(X).

Two routes:

  solve_newton_direct   vectorized saddle-point system in (vec Z, veck Ω),
                        eliminated through an LU of the ambient block
  solve_newton_krylov   MINRES in the metric inner product on the tangent space,
                        with a forcing-term stopping rule

Both return the direction as a TangentVector together with a NewtonSolveReport.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

import config
from geometry.errors import DirectSolveError, WrongMetricError
from geometry.hessian import HessianOperator
from geometry.linalg import duplication_matrix, kron, unvec, unveck, vec
from geometry.manifold import SymplecticPoint, TangentVector, apply_J, as_point, poisson
from geometry.metrics import CanonicalLikeMetric, Metric, WeightedEuclideanMetric

logger = logging.getLogger(__name__)

# Weight matrices denser than this use the M-free saddle form
DENSE_WEIGHT_FILL = 0.1


@dataclass
class NewtonSolveReport:
    method: str
    iterations: int
    residual_norm: float
    forcing_target: float
    status: str
    a_solves: int = 0
    multiplier: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("multiplier")
        return d


# ── Direct saddle-point solve ─────────────────────────────────────────────────

@dataclass
class SaddleSystem:
    """
    [A B; C 0] [vec Z; veck Ω] = [g; 0].

    ``weight_free`` marks the form premultiplied by M (C = Bᵀ up to scale),
    used when M^{-1} would be dense.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    g: np.ndarray
    rows: int
    cols: int
    weight_free: bool = False

    @property
    def size(self) -> int:
        return self.A.shape[0] + self.B.shape[1]

    def full_matrix(self) -> np.ndarray:
        m = self.B.shape[1]
        return np.block([[self.A, self.B], [self.C, np.zeros((m, m))]])


def _operator_matrix(fn: Callable[[np.ndarray], np.ndarray], rows: int, cols: int) -> np.ndarray:
    """Columnwise assembly of the matrix of a linear map on rows×cols matrices."""
    size = rows * cols
    out = np.empty((size, size))
    E = np.zeros(size)
    for idx in range(size):
        E[idx] = 1.0
        out[:, idx] = vec(fn(unvec(E, rows, cols)))
        E[idx] = 0.0
    return out


def _uses_weight_free_form(metric: Metric) -> bool:
    if not isinstance(metric, WeightedEuclideanMetric):
        return False
    return np.count_nonzero(metric.M) > DENSE_WEIGHT_FILL * metric.M.size


def build_saddle_system(metric: Metric, point: SymplecticPoint, cost, egrad: Optional[np.ndarray] = None) -> SaddleSystem:
    """
    Vectorized Newton system for the (weighted) Euclidean metrics.

    Default form: A = I⊗M^{-1}∇²f̄ − Ωᵀ⊗M^{-1}J, B = −2(I⊗N)D,
    C = −Dᵀ(I⊗(JX)ᵀ), g = vec(−M^{-1}∇f̄) with N = M^{-1}JX.
    Weight-free form: A = I⊗∇²f̄ − Ωᵀ⊗J, B = −2(I⊗JX)D, C = Bᵀ, g = vec(−∇f̄).
    """
    if isinstance(metric, CanonicalLikeMetric):
        raise WrongMetricError("the direct saddle solve is defined for the (weighted) Euclidean metrics only")
    X = point.X
    rows, cols = X.shape
    G = cost.egrad(X) if egrad is None else egrad
    Omega = metric.normal_multiplier(point, metric.minv_apply(point, G))
    D = duplication_matrix(cols)
    I = np.eye(cols)
    J = poisson(point.n)
    H = cost.constant_hessian_matrix
    weight_free = _uses_weight_free_form(metric)

    if weight_free:
        if H is not None:
            A = kron(I, H) - kron(Omega.T, J)
        else:
            A = _operator_matrix(lambda V: cost.ehess(X, V) - apply_J(V @ Omega), rows, cols)
        B = -2.0 * kron(I, point.JX) @ D
        return SaddleSystem(A, B, B.T.copy(), vec(-G), rows, cols, weight_free=True)

    if H is not None:
        MinvH = metric.minv_apply(point, H)
        MinvJ = metric.minv_apply(point, J)
        A = kron(I, MinvH) - kron(Omega.T, MinvJ)
    else:
        A = _operator_matrix(
            lambda V: metric.minv_apply(point, cost.ehess(X, V) - apply_J(V @ Omega)), rows, cols
        )
    B = -2.0 * kron(I, metric.normal_factor(point)) @ D
    C = -D.T @ kron(I, point.JX.T)
    return SaddleSystem(A, B, C, vec(-metric.minv_apply(point, G)), rows, cols)


def _lu_or_fail(A: np.ndarray, what: str):
    try:
        lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise DirectSolveError(f"{what}: {exc}") from exc
    diag = np.abs(np.diag(lu))
    if diag.size and diag.min() <= diag.max() / config.SINGULAR_COND:
        raise DirectSolveError(f"{what} is numerically singular")
    return lu, piv


def _newton_residual(op: HessianOperator, Z: np.ndarray) -> float:
    R = op.metric.project(op.point, op.apply(Z)) + op.grad
    return float(np.sqrt(max(float(np.sum(R * op.metric.m_apply(op.point, R))), 0.0)))


def solve_newton_direct(metric: Metric, X, cost, hessian: Optional[HessianOperator] = None) -> tuple[TangentVector, NewtonSolveReport]:
    """
    Exact Newton direction from the saddle system, eliminating Z through the
    LU of A (one solve for the right-hand side plus one per multiplier column)
    and solving the small Schur complement C A^{-1} B for the multiplier.
    """
    point = as_point(X)
    op = hessian or HessianOperator(metric, point, cost)
    system = build_saddle_system(metric, point, cost, egrad=op.egrad)

    factor = _lu_or_fail(system.A, "ambient block A")
    rhs = np.column_stack([system.g, system.B])
    sol = scipy.linalg.lu_solve(factor, rhs)
    a_solves = rhs.shape[1]
    AinvG, AinvB = sol[:, 0], sol[:, 1:]

    schur = system.C @ AinvB
    schur_factor = _lu_or_fail(schur, "Schur complement")
    w = scipy.linalg.lu_solve(schur_factor, system.C @ AinvG)
    z = AinvG - AinvB @ w
    if not np.all(np.isfinite(z)):
        raise DirectSolveError("non-finite Newton direction")

    Z = unvec(z, system.rows, system.cols)
    gnorm = metric.norm(point, op.grad)
    residual = _newton_residual(op, Z)
    target = config.DIRECT_RESIDUAL_TOL * gnorm
    report = NewtonSolveReport(
        method="direct",
        iterations=1,
        residual_norm=residual,
        forcing_target=target,
        status="converged" if residual <= target else "inaccurate",
        a_solves=a_solves,
        multiplier=unveck(w, system.cols),
    )
    logger.debug("direct Newton solve: size=%d residual=%.2e", system.size, residual)
    return TangentVector(point, Z), report


# ── Krylov solve ──────────────────────────────────────────────────────────────

@dataclass
class MinresResult:
    x: np.ndarray
    iterations: int
    estimate: float
    exact_breakdown: bool = False


def metric_minres(
    apply_op: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    inner: Callable[[np.ndarray, np.ndarray], float],
    tol: float,
    maxiter: int,
) -> MinresResult:
    """
    MINRES (Paige–Saunders) for a self-adjoint operator in the inner product
    ``inner``. Stops once the recurrence estimate of ‖b − A x‖ reaches ``tol``.
    """
    eps = np.finfo(float).eps
    x = np.zeros_like(b)
    beta1 = float(np.sqrt(max(inner(b, b), 0.0)))
    if beta1 == 0.0:
        return MinresResult(x, 0, 0.0)

    r1 = b.copy()
    r2 = b.copy()
    y = b.copy()
    w = np.zeros_like(b)
    w2 = np.zeros_like(b)
    oldb, beta = 0.0, beta1
    dbar = epsln = 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0

    itn = 0
    while itn < maxiter:
        itn += 1
        v = y / beta
        y = apply_op(v)
        if itn >= 2:
            y = y - (beta / oldb) * r1
        alfa = inner(v, y)
        y = y - (alfa / beta) * r2
        r1, r2 = r2, y
        oldb = beta
        beta = float(np.sqrt(max(inner(r2, r2), 0.0)))

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta

        gamma = max(float(np.hypot(gbar, beta)), eps)
        cs, sn = gbar / gamma, beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w

        if phibar <= tol:
            break
        if beta <= eps * beta1:
            return MinresResult(x, itn, phibar, exact_breakdown=True)
    return MinresResult(x, itn, phibar)


def solve_newton_krylov(
    metric: Metric,
    X,
    cost,
    eta: float = config.NEWTON_ETA,
    mu: float = config.NEWTON_MU,
    max_inner: Optional[int] = None,
    hessian: Optional[HessianOperator] = None,
) -> tuple[TangentVector, NewtonSolveReport]:
    """
    Inexact Newton direction: MINRES on the tangent space until
    ‖Hess[Z] + grad‖_g ≤ min(η, ‖grad‖_g^μ)·‖grad‖_g or ``max_inner`` steps.
    """
    point = as_point(X)
    op = hessian or HessianOperator(metric, point, cost)
    grad = op.grad
    gnorm = metric.norm(point, grad)
    cap = point.n * point.k if max_inner is None else int(max_inner)
    if gnorm == 0.0:
        report = NewtonSolveReport("krylov", 0, 0.0, 0.0, "converged")
        return TangentVector(point, np.zeros_like(grad)), report

    target = min(eta, gnorm ** mu) * gnorm

    def apply_op(V: np.ndarray) -> np.ndarray:
        return metric.project(point, op.apply(V))

    def g_inner(A: np.ndarray, B: np.ndarray) -> float:
        return float(np.sum(A * metric.m_apply(point, B)))

    result = metric_minres(apply_op, -grad, g_inner, target, cap)
    Z = metric.project(point, result.x)
    residual = _newton_residual(op, Z)
    if residual <= target * (1.0 + 1e-6):
        status = "converged"
    elif result.exact_breakdown:
        status = "breakdown"
    else:
        status = "cap-reached" if result.iterations >= cap else "stalled"
    report = NewtonSolveReport(
        method="krylov",
        iterations=result.iterations,
        residual_norm=residual,
        forcing_target=target,
        status=status,
    )
    logger.debug("MINRES: %d iterations, residual %.2e (target %.2e) %s", result.iterations, residual, target, status)
    return TangentVector(point, Z), report
