"""
Quick acceptance checks behind `main.py check`.

Each check is a reduced-sample version of a desk-scale criterion and returns
a CheckResult; run_checks prints a pass/fail table.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from data.generators import block_symplectic, least_squares_instance
from data.problems import LeastSquaresCost, QuarticTraceCost, least_squares_problem
from geometry.hessian import hess_canonical_full_rank, hess_euclidean_reference, hessian_operator
from geometry.linalg import (
    LyapunovSolver,
    commutation_matrix,
    duplication_matrix,
    kron,
    skew,
    unveck,
    vec,
    veck,
)
from geometry.manifold import ManifoldDims, dfx, feasibility, random_point, random_tangent
from geometry.metrics import CanonicalLikeMetric, EuclideanMetric, WeightedEuclideanMetric
from geometry.oracles import hess_fd_assembly
from geometry.retractions import RetractionKind, retract
from solvers.newton_equation import solve_newton_direct, solve_newton_krylov
from solvers.optimizers import STATUS_CONVERGED, OptimizerConfig, hybrid

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail, "seconds": self.seconds}


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-300)
    return float(np.linalg.norm(a - b)) / scale


def _spd(size: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.standard_normal((size, size))
    return A @ A.T / size + np.eye(size)


# ── Least squares with known minimizer ────────────────────────────────────────

def check_least_squares(seed: int = 0) -> CheckResult:
    problem = least_squares_instance(n=50, k=6, seed=seed)
    cfg = OptimizerConfig(
        metric=WeightedEuclideanMetric(problem.metric_weight),
        retraction=RetractionKind.SR,
        tol=1e-10,
        theta=1e-4,
        mxit=2000,
    )
    run = hybrid(cfg, problem, problem.x0, second_phase="RN")
    dist = problem.rel_dist_to_known_min(run.X_star)
    phase2 = run.phase_iters["Newton"]
    passed = run.status == STATUS_CONVERGED and dist <= 1e-6 and run.feas <= 1e-9 and phase2 <= 10
    detail = f"{run.scheme}: status={run.status} dist={dist:.2e} feas={run.feas:.1e} phase2={phase2}"
    return CheckResult("least squares known minimizer", passed, detail)


# ── Hessian oracles ───────────────────────────────────────────────────────────

def check_hessian_oracles(samples: int = 6, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_fd = 0.0
    worst_exact = 0.0
    for i in range(samples):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(1, min(n, 2) + 1))
        point = random_point(ManifoldDims(n, k), rng)
        cost = LeastSquaresCost(rng.standard_normal((2 * n, 2 * n)), rng.standard_normal((2 * n, 2 * k)))
        Z = random_tangent(point, rng)
        for metric in (CanonicalLikeMetric(), CanonicalLikeMetric(0.5), EuclideanMetric(),
                       WeightedEuclideanMetric(_spd(2 * n, rng))):
            op = hessian_operator(metric, point, cost)
            worst_fd = max(worst_fd, _rel(op.apply(Z), hess_fd_assembly(metric, point, cost, Z)))

        op = hessian_operator(EuclideanMetric(), point, cost)
        worst_exact = max(worst_exact, _rel(op.apply(Z), hess_euclidean_reference(op, Z).Z))

        square = random_point(ManifoldDims(n, n), rng)
        quartic = QuarticTraceCost(_spd(2 * n, rng), _spd(2 * n, rng))
        op = hessian_operator(CanonicalLikeMetric(), square, quartic)
        Zs = random_tangent(square, rng)
        worst_exact = max(worst_exact, _rel(op.apply(Zs), hess_canonical_full_rank(op, Zs).Z))

    passed = worst_fd <= 1e-5 and worst_exact <= 1e-12
    return CheckResult("Hessian oracles", passed, f"fd={worst_fd:.1e} exact-paths={worst_exact:.1e}")


# ── Newton solvers ────────────────────────────────────────────────────────────

def check_newton_solvers(samples: int = 3, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    n, k = 10, 2
    worst_agree = 0.0
    worst_saddle = 0.0
    for _ in range(samples):
        A1, A2 = rng.random((n, n)), rng.random((n, n))
        A = block_symplectic(0.1 * (A1 + A1.T), 0.1 * (A2 + A2.T))
        B = rng.standard_normal((2 * n, 2 * k))
        problem = least_squares_problem(A, B)
        metric = WeightedEuclideanMetric(problem.metric_weight)
        point = random_point(problem.dims, rng)

        Zd, report = solve_newton_direct(metric, point, problem.cost)
        Zk, _ = solve_newton_krylov(metric, point, problem.cost, eta=1e-11, mu=1.0,
                                     max_inner=4 * problem.dims.dim)
        worst_agree = max(worst_agree, _rel(Zd.Z, Zk.Z))

        # (Z, Ω) solve the saddle equations: tangency and the projected Newton equation
        gnorm = metric.norm(point, metric.gradient(point, problem.cost.egrad(point.X)))
        tangency = float(np.linalg.norm(dfx(point, Zd.Z))) / max(float(np.linalg.norm(Zd.Z)), 1.0)
        worst_saddle = max(worst_saddle, tangency, report.residual_norm / gnorm)

    passed = worst_agree <= 1e-6 and worst_saddle <= 1e-8
    return CheckResult("Newton solvers", passed, f"direct-vs-krylov={worst_agree:.1e} saddle={worst_saddle:.1e}")


# ── Invariant suites ──────────────────────────────────────────────────────────

def check_invariants(samples: int = 25, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst: Dict[str, float] = {
        "retraction_feas": 0.0,
        "projection_idempotence": 0.0,
        "gradient_identity": 0.0,
        "hessian_self_adjoint": 0.0,
        "vectorization": 0.0,
        "lyapunov": 0.0,
    }
    for _ in range(samples):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, n + 1))
        point = random_point(ManifoldDims(n, k), rng)
        cost = LeastSquaresCost(rng.standard_normal((2 * n, 2 * n)), rng.standard_normal((2 * n, 2 * k)))
        Z = 0.1 * random_tangent(point, rng)
        U = random_tangent(point, rng)

        for kind in RetractionKind:
            worst["retraction_feas"] = max(worst["retraction_feas"], feasibility(retract(kind, point, Z).X))

        for metric in (CanonicalLikeMetric(), EuclideanMetric(), WeightedEuclideanMetric(_spd(2 * n, rng))):
            Y = rng.standard_normal(point.X.shape)
            PY = metric.project(point, Y)
            worst["projection_idempotence"] = max(
                worst["projection_idempotence"], _rel(metric.project(point, PY), PY)
            )
            G = cost.egrad(point.X)
            grad = metric.gradient(point, G)
            lhs, rhs = metric.inner(point, grad, U), float(np.sum(G * U))
            worst["gradient_identity"] = max(
                worst["gradient_identity"], abs(lhs - rhs) / max(abs(rhs), np.linalg.norm(G) * np.linalg.norm(U))
            )
            op = hessian_operator(metric, point, cost)
            HZ, HU = op.apply(Z), op.apply(U)
            a, b = metric.inner(point, U, HZ), metric.inner(point, Z, HU)
            scale = max(metric.norm(point, HZ) * metric.norm(point, U), metric.norm(point, HU) * metric.norm(point, Z), 1e-300)
            worst["hessian_self_adjoint"] = max(worst["hessian_self_adjoint"], abs(a - b) / scale)

        p, q, r = (int(x) for x in rng.integers(1, 5, size=3))
        Am, Xm, Bm = rng.standard_normal((p, q)), rng.standard_normal((q, r)), rng.standard_normal((r, p))
        m = int(rng.integers(2, 6))
        Om = skew(rng.standard_normal((m, m)))
        errs = [
            _rel(vec(Am @ Xm @ Bm), kron(Bm.T, Am) @ vec(Xm)),
            _rel(commutation_matrix(p, q) @ vec(Am), vec(Am.T)),
            _rel(duplication_matrix(m) @ veck(Om), vec(Om)),
            _rel(unveck(veck(Om), m), Om),
        ]
        worst["vectorization"] = max(worst["vectorization"], *errs)

        C = _spd(m, rng)
        R = rng.standard_normal((m, m))
        oracle = np.linalg.solve(kron(np.eye(m), C) + kron(C, np.eye(m)), vec(R))
        worst["lyapunov"] = max(worst["lyapunov"], _rel(vec(LyapunovSolver(C).solve(R)), oracle))

    limits = {
        "retraction_feas": 1e-9,
        "projection_idempotence": 1e-10,
        "gradient_identity": 1e-8,
        "hessian_self_adjoint": 1e-9,
        "vectorization": 1e-14,
        "lyapunov": 1e-10,
    }
    failed = [name for name, value in worst.items() if value > limits[name]]
    detail = " ".join(f"{name}={value:.0e}" for name, value in worst.items())
    return CheckResult("invariant suites", not failed, detail)


# ── Runner ────────────────────────────────────────────────────────────────────

CHECKS: Dict[str, Callable[[], CheckResult]] = {
    "least_squares": check_least_squares,
    "hessian_oracles": check_hessian_oracles,
    "newton_solvers": check_newton_solvers,
    "invariants": check_invariants,
}


def run_checks(names: Optional[List[str]] = None) -> List[CheckResult]:
    results = []
    for name in names or list(CHECKS):
        t0 = time.perf_counter()
        try:
            result = CHECKS[name]()
        except Exception as exc:
            logger.exception("check %s raised", name)
            result = CheckResult(name, False, f"{type(exc).__name__}: {exc}")
        result.seconds = time.perf_counter() - t0
        mark = "✓" if result.passed else "✗"
        print(f"  [{mark}] {result.name:<32} {result.seconds:6.2f}s  {result.detail}")
        results.append(result)
    return results
