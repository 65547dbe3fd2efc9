import numpy as np
import pytest

import config
import solvers.optimizers as optimizers
from data.generators import least_squares_instance, trace_instance
from data.problems import LeastSquaresCost, Problem
from evaluation.report import HISTORY_COLUMNS, fit_convergence_order
from geometry.errors import ConfigError, DirectSolveError, InvariantError
from geometry.linalg import symplectic_factor
from geometry.manifold import ManifoldDims, TangentVector, random_point
from geometry.metrics import CanonicalLikeMetric, EuclideanMetric, WeightedEuclideanMetric
from geometry.retractions import RetractionKind
from solvers.newton_equation import NewtonSolveReport
from solvers.optimizers import (
    PHASE_INIT,
    PHASE_NEWTON,
    PHASE_RGD,
    LineSearchParams,
    NewtonParams,
    OptimizerConfig,
    hybrid,
    newton,
    rgd,
    run_method,
)


@pytest.fixture(scope="module")
def small_trace():
    return trace_instance(n=10, k=2, seed=3)


@pytest.fixture(scope="module")
def small_ls():
    return least_squares_instance(n=10, k=2, seed=4)


# ── Configuration ─────────────────────────────────────────────────────────────

def test_config_parses_retraction_token():
    cfg = OptimizerConfig(metric=EuclideanMetric(), retraction="cay")
    assert cfg.retraction is RetractionKind.CAYLEY


@pytest.mark.parametrize(
    "kwargs",
    [
        {"tol": 1e-3, "theta": 1e-3},
        {"tol": 0.0},
        {"mxit": 0},
        {"stop_mode": "percent"},
        {"retraction": "qr"},
        {"line_search": LineSearchParams(alpha=1.5)},
        {"line_search": LineSearchParams(gamma0=1e6)},
        {"newton": NewtonParams(eta=1.0)},
        {"newton": NewtonParams(mu=0.0)},
        {"newton": NewtonParams(max_inner=0)},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        OptimizerConfig(metric=EuclideanMetric(), **kwargs)


def test_config_requires_metric_instance():
    with pytest.raises(ConfigError):
        OptimizerConfig(metric="e")


def test_unknown_method_and_phase(small_trace):
    cfg = OptimizerConfig(metric=EuclideanMetric())
    with pytest.raises(ConfigError):
        run_method("BFGS", cfg, small_trace)
    with pytest.raises(ConfigError):
        hybrid(cfg, small_trace, second_phase="RGD")


# ── RGD ───────────────────────────────────────────────────────────────────────

def test_weighted_rgd_reaches_trace_minimum(small_trace):
    cfg = OptimizerConfig(metric=WeightedEuclideanMetric(small_trace.metric_weight), tol=1e-9)
    report = rgd(cfg, small_trace)
    assert report.status == "converged"
    assert report.f_star == pytest.approx(small_trace.f_min, abs=1e-6)
    assert report.grad_norm_rel <= 1e-9
    assert report.feas <= 1e-8
    assert report.scheme == "RGD-SR-M"
    assert report.phase_iters[PHASE_NEWTON] == 0


def test_records_are_ordered(small_trace):
    cfg = OptimizerConfig(metric=WeightedEuclideanMetric(small_trace.metric_weight))
    report = rgd(cfg, small_trace)
    first = report.records[0]
    assert first.phase == PHASE_INIT and first.j == 0 and first.step == 0.0
    assert [r.j for r in report.records] == list(range(len(report.records)))
    assert all(r.phase == PHASE_RGD for r in report.records[1:])
    assert len(report.records) == report.total_iters + 1
    frame = report.history_frame()
    assert list(frame.columns) == HISTORY_COLUMNS
    assert frame["grad_norm_rel"].iloc[0] == pytest.approx(1.0)


def test_monotone_rgd_never_increases_f(small_trace):
    cfg = OptimizerConfig(
        metric=EuclideanMetric(),
        retraction="Cay",
        mxit=60,
        line_search=LineSearchParams(alpha=0.0),
    )
    report = rgd(cfg, small_trace)
    values = [r.f for r in report.records]
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert report.status in {"converged", "max-iterations"}


def test_nonmonotone_rgd_respects_reference(small_trace):
    alpha, beta = 0.85, 1e-4
    cfg = OptimizerConfig(metric=EuclideanMetric(), mxit=40, line_search=LineSearchParams(alpha=alpha, beta=beta))
    report = rgd(cfg, small_trace)
    Q, c = 1.0, report.records[0].f
    for rec in report.records[1:]:
        assert rec.f <= c
        Q_new = alpha * Q + 1.0
        c = (alpha * Q * c + rec.f) / Q_new
        Q = Q_new


def test_zero_gradient_start_returns_immediately(rng):
    point = random_point(ManifoldDims(3, 1), rng)
    problem = Problem("flat", LeastSquaresCost(np.eye(6), point.X), point.dims, x0=point)
    for method in optimizers.METHODS:
        report = run_method(method, OptimizerConfig(metric=EuclideanMetric()), problem)
        assert report.status == "converged", method
        assert report.total_iters == 0
        assert report.f_star == 0.0
        assert len(report.records) == 1


def test_error_status_keeps_last_iterate(small_trace, monkeypatch):
    calls = {"n": 0}
    real_retract = optimizers.retract

    def flaky(kind, point, Z):
        calls["n"] += 1
        if calls["n"] > 3:
            raise InvariantError("corrupted iterate")
        return real_retract(kind, point, Z)

    monkeypatch.setattr(optimizers, "retract", flaky)
    report = rgd(OptimizerConfig(metric=EuclideanMetric()), small_trace)
    assert report.status == "error"
    assert "InvariantError" in report.message
    assert report.X_star is not None
    assert report.feas <= 1e-8


# ── Newton and hybrid ─────────────────────────────────────────────────────────

def test_hybrid_newton_converges_on_least_squares(small_ls):
    cfg = OptimizerConfig(metric=WeightedEuclideanMetric(small_ls.metric_weight), theta=1e-3, tol=1e-10)
    report = hybrid(cfg, small_ls, second_phase="RN")
    assert report.status == "converged"
    assert report.phase_iters[PHASE_RGD] > 0
    assert 0 < report.phase_iters[PHASE_NEWTON] <= 10
    assert small_ls.rel_dist_to_known_min(report.X_star) <= 1e-6
    phases = [r.phase for r in report.records[1:]]
    assert phases == sorted(phases, key=lambda p: p == PHASE_NEWTON)


def test_inexact_hybrid_on_canonical_metric(small_ls):
    cfg = OptimizerConfig(metric=CanonicalLikeMetric(), theta=1e-3, tol=1e-9)
    report = hybrid(cfg, small_ls, second_phase="RiN")
    assert report.status == "converged"
    assert report.scheme == "hRiN-SR-c"
    newton_records = [r for r in report.records if r.phase == PHASE_NEWTON]
    assert newton_records and all(r.inner_iters >= 1 for r in newton_records)


def test_theta_at_least_one_skips_first_phase(small_ls):
    cfg = OptimizerConfig(metric=WeightedEuclideanMetric(small_ls.metric_weight), theta=1.0, tol=1e-8, mxit=200)
    report = hybrid(cfg, small_ls)
    assert report.phase_iters[PHASE_RGD] == 0
    assert report.phase_iters[PHASE_NEWTON] > 0


def test_switch_failed_when_first_phase_runs_out(small_trace):
    cfg = OptimizerConfig(metric=EuclideanMetric(), mxit=2, theta=1e-3)
    report = hybrid(cfg, small_trace)
    assert report.status == "switch-failed"
    assert report.phase_iters[PHASE_RGD] == 2
    assert report.phase_iters[PHASE_NEWTON] == 0


def test_absolute_stop_mode(small_ls):
    cfg = OptimizerConfig(
        metric=WeightedEuclideanMetric(small_ls.metric_weight), stop_mode="absolute", theta=1e-2, tol=1e-8
    )
    report = hybrid(cfg, small_ls)
    assert report.status == "converged"
    assert report.grad_norm <= 1e-8


def test_direct_failure_falls_back_to_krylov(small_ls, monkeypatch):
    def broken(*args, **kwargs):
        raise DirectSolveError("singular")

    monkeypatch.setattr(optimizers, "solve_newton_direct", broken)
    cfg = OptimizerConfig(metric=EuclideanMetric(), theta=1e-3, tol=1e-9)
    report = hybrid(cfg, small_ls)
    assert report.status == "converged"
    assert report.krylov_fallbacks == report.phase_iters[PHASE_NEWTON] > 0


def test_ascent_direction_falls_back_to_gradient(small_trace, monkeypatch):
    def uphill(metric, X, cost, eta, mu, max_inner=None, hessian=None):
        return TangentVector(hessian.point, hessian.grad), NewtonSolveReport("krylov", 1, 0.0, 0.0, "converged")

    monkeypatch.setattr(optimizers, "solve_newton_krylov", uphill)
    cfg = OptimizerConfig(metric=CanonicalLikeMetric(), mxit=3)
    report = newton(cfg, small_trace, inexact=True)
    assert report.gradient_fallbacks == report.phase_iters[PHASE_NEWTON] == 3
    values = [r.f for r in report.records]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_undamped_newton_near_minimizer(small_ls):
    X0 = small_ls.known_minimizer + 1e-4 * np.random.default_rng(0).standard_normal(small_ls.known_minimizer.shape)
    start = symplectic_factor(X0)
    cfg = OptimizerConfig(
        metric=EuclideanMetric(), newton=NewtonParams(damping=False), stop_mode="absolute", tol=1e-10, mxit=20
    )
    report = newton(cfg, small_ls, X0=start)
    assert report.status == "converged"
    assert report.phase_iters[PHASE_NEWTON] <= 6


def test_minres_breakdown_falls_back_to_gradient(small_trace, monkeypatch):
    def broken(metric, X, cost, eta, mu, max_inner=None, hessian=None):
        gnorm = metric.norm(hessian.point, hessian.grad)
        report = NewtonSolveReport("krylov", 2, gnorm, 1e-3 * gnorm, "breakdown")
        return TangentVector(hessian.point, -0.5 * hessian.grad), report

    monkeypatch.setattr(optimizers, "solve_newton_krylov", broken)
    cfg = OptimizerConfig(metric=CanonicalLikeMetric(), mxit=3)
    report = newton(cfg, small_trace, inexact=True)
    assert report.gradient_fallbacks == report.phase_iters[PHASE_NEWTON] == 3


def test_newton_without_gradient_progress_stagnates(small_trace, monkeypatch):
    def timid(metric, X, cost, eta, mu, max_inner=None, hessian=None):
        return TangentVector(hessian.point, -1e-6 * hessian.grad), NewtonSolveReport("krylov", 1, 0.0, 0.0, "converged")

    monkeypatch.setattr(optimizers, "solve_newton_krylov", timid)
    cfg = OptimizerConfig(metric=CanonicalLikeMetric(), mxit=200)
    report = newton(cfg, small_trace, inexact=True)
    assert report.status == "stagnated"
    assert report.phase_iters[PHASE_NEWTON] == config.NEWTON_STALL_WINDOW
    assert report.gradient_fallbacks == 0


def test_singular_hessian_newton_run_terminates():
    # the trace cost is invariant under orthogonal-symplectic X → XS
    problem = trace_instance(n=6, k=1, seed=1)
    cfg = OptimizerConfig(metric=EuclideanMetric(), retraction="Cay", tol=1e-8, theta=1e-3, mxit=500)
    report = hybrid(cfg, problem, second_phase="RN")
    assert report.status in {"converged", "stagnated"}
    assert report.phase_iters[PHASE_NEWTON] < 500
    assert report.feas <= 1e-8


def test_large_saddle_system_goes_through_krylov(small_ls, monkeypatch):
    def refuse(*args, **kwargs):
        raise AssertionError("dense saddle solve above the size limit")

    monkeypatch.setattr(optimizers, "solve_newton_direct", refuse)
    monkeypatch.setattr(config, "DIRECT_MAX_SIZE", small_ls.dims.ambient_size - 1)
    cfg = OptimizerConfig(metric=WeightedEuclideanMetric(small_ls.metric_weight), theta=1e-3, tol=1e-10)
    report = hybrid(cfg, small_ls, second_phase="RN")
    assert report.status == "converged"
    assert report.krylov_fallbacks == 0
    assert small_ls.rel_dist_to_known_min(report.X_star) <= 1e-6


@pytest.mark.parametrize("failure", [np.linalg.LinAlgError("singular"), MemoryError()])
def test_numerical_failure_becomes_error_status(small_trace, monkeypatch, failure):
    real_retract = optimizers.retract
    calls = {"n": 0}

    def failing(kind, point, Z):
        calls["n"] += 1
        if calls["n"] > 2:
            raise failure
        return real_retract(kind, point, Z)

    monkeypatch.setattr(optimizers, "retract", failing)
    report = rgd(OptimizerConfig(metric=EuclideanMetric()), small_trace)
    assert report.status == "error"
    assert type(failure).__name__ in report.message
    assert report.X_star is not None


# ── Slow behavioural checks ───────────────────────────────────────────────────

def _near_minimizer(problem, scale, seed=0):
    X = problem.known_minimizer
    return symplectic_factor(X + scale * np.random.default_rng(seed).standard_normal(X.shape))


def _rate_residuals(report):
    residuals = [r.grad_norm for r in report.records if r.phase in (PHASE_INIT, PHASE_NEWTON)]
    # roundoff floor excluded
    return [r for r in residuals if r > 1e-10 * residuals[0]]


@pytest.mark.slow
def test_trace_rgd_with_weighted_metric():
    problem = trace_instance(n=200, k=5, seed=0)
    cfg = OptimizerConfig(metric=WeightedEuclideanMetric(problem.metric_weight), tol=1e-8, mxit=100)
    report = rgd(cfg, problem)
    assert report.status == "converged"
    assert report.grad_norm_rel <= 1e-8
    assert report.f_star == pytest.approx(15.0, abs=1e-6)


@pytest.mark.slow
def test_exact_newton_is_quadratic_near_minimizer():
    problem = least_squares_instance(n=10, k=2, seed=4)
    cfg = OptimizerConfig(metric=WeightedEuclideanMetric(problem.metric_weight), tol=1e-10)
    report = newton(cfg, problem, X0=_near_minimizer(problem, 1e-2))
    assert report.status == "converged"
    residuals = _rate_residuals(report)
    assert len(residuals) >= 3
    assert fit_convergence_order(residuals) >= 1.7


@pytest.mark.slow
def test_inexact_newton_is_superlinear_near_minimizer():
    problem = least_squares_instance(n=10, k=2, seed=4)
    newton_params = NewtonParams(eta=0.9, mu=0.5, max_inner=4 * problem.dims.dim)
    cfg = OptimizerConfig(metric=EuclideanMetric(), tol=1e-10, newton=newton_params)
    report = newton(cfg, problem, X0=_near_minimizer(problem, 1e-3), inexact=True)
    assert report.status == "converged"
    residuals = _rate_residuals(report)
    assert len(residuals) >= 3
    assert fit_convergence_order(residuals) >= 1.3


@pytest.mark.slow
@pytest.mark.parametrize(
    "build",
    [lambda: trace_instance(n=30, k=2, seed=1), lambda: least_squares_instance(n=20, k=2, seed=2)],
    ids=["trace", "least_squares"],
)
def test_weighted_metric_preconditions_rgd(build):
    problem = build()
    base = {"tol": 1e-8, "mxit": 5000}
    weighted = rgd(OptimizerConfig(metric=WeightedEuclideanMetric(problem.metric_weight), **base), problem)
    plain = rgd(OptimizerConfig(metric=EuclideanMetric(), **base), problem)
    assert weighted.status == "converged"
    assert plain.total_iters >= 5 * weighted.total_iters


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_restarts_reach_same_trace_minimum(seed):
    problem = trace_instance(n=12, k=2, seed=5)
    X0 = random_point(problem.dims, seed)
    cfg = OptimizerConfig(metric=WeightedEuclideanMetric(problem.metric_weight), theta=1e-3, tol=1e-10)
    report = hybrid(cfg, problem, X0=X0, second_phase="RiN")
    assert report.status == "converged"
    assert report.f_star == pytest.approx(problem.f_min, abs=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_restarts_reach_least_squares_minimum(seed):
    problem = least_squares_instance(n=10, k=2, seed=4)
    X0 = random_point(problem.dims, 100 + seed)
    cfg = OptimizerConfig(metric=WeightedEuclideanMetric(problem.metric_weight), theta=1e-4, tol=1e-10)
    report = hybrid(cfg, problem, X0=X0, second_phase="RN")
    assert report.status == "converged"
    assert report.f_star <= 1e-9
