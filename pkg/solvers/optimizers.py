"""
Optimization drivers on Sp(2k, 2n).

  rgd     Riemannian gradient descent with a Zhang–Hager non-monotone line
          search and alternating Barzilai–Borwein trial steps
  newton  Riemannian Newton (exact: direct saddle solve or tight Krylov;
          inexact: forcing-term MINRES) with monotone damping
  hybrid  RGD until ‖grad‖ ≤ θ·‖grad(X0)‖, then Newton

Every driver returns a RunReport carrying per-iteration records and the
terminal state. Statuses: converged, max-iterations, stagnated,
switch-failed, error.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

import config
from data.problems import Problem
from geometry.errors import (
    NUMERICAL_FAILURES,
    ConfigError,
    DirectSolveError,
    InvariantError,
    RetractionDomainError,
    SymplecticError,
)
from geometry.hessian import HessianOperator
from geometry.manifold import SymplecticPoint, as_point
from geometry.metrics import CanonicalLikeMetric, Metric
from geometry.retractions import RetractionKind, retract
from solvers.line_search import NonmonotoneLineSearch, barzilai_borwein_step, monotone_backtracking
from solvers.newton_equation import NewtonSolveReport, solve_newton_direct, solve_newton_krylov

logger = logging.getLogger(__name__)

PHASE_RGD = "RGD"
PHASE_NEWTON = "Newton"
PHASE_INIT = "init"

STATUS_CONVERGED = "converged"
STATUS_MAX_ITER = "max-iterations"
STATUS_STAGNATED = "stagnated"
STATUS_SWITCH_FAILED = "switch-failed"
STATUS_ERROR = "error"


# ── Configuration ─────────────────────────────────────────────────────────────

@dataclass
class LineSearchParams:
    alpha: float = config.LS_ALPHA
    beta: float = config.LS_BETA
    delta: float = config.LS_DELTA
    gamma0: float = config.LS_GAMMA0
    gamma_min: float = config.LS_GAMMA_MIN
    gamma_max: float = config.LS_GAMMA_MAX

    def validate(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"line search alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ConfigError(f"line search beta must lie in (0, 1), got {self.beta}")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"line search delta must lie in (0, 1), got {self.delta}")
        if not 0.0 < self.gamma_min <= self.gamma0 <= self.gamma_max:
            raise ConfigError("need 0 < gamma_min ≤ gamma0 ≤ gamma_max")


@dataclass
class NewtonParams:
    eta: float = config.NEWTON_ETA
    mu: float = config.NEWTON_MU
    max_inner: Optional[int] = None
    damping_delta: float = config.DAMPING_DELTA
    damping: bool = True

    def validate(self) -> None:
        if not 0.0 < self.eta < 1.0:
            raise ConfigError(f"forcing cap eta must lie in (0, 1), got {self.eta}")
        if not 0.0 < self.mu <= 1.0:
            raise ConfigError(f"forcing exponent mu must lie in (0, 1], got {self.mu}")
        if self.max_inner is not None and self.max_inner < 1:
            raise ConfigError("max_inner must be positive")
        if not 0.0 < self.damping_delta < 1.0:
            raise ConfigError(f"damping_delta must lie in (0, 1), got {self.damping_delta}")


@dataclass
class OptimizerConfig:
    metric: Metric
    retraction: RetractionKind = RetractionKind.SR
    tol: float = config.TOL
    mxit: int = config.MXIT
    theta: float = config.THETA
    stop_mode: str = "relative"
    line_search: LineSearchParams = field(default_factory=LineSearchParams)
    newton: NewtonParams = field(default_factory=NewtonParams)

    def __post_init__(self):
        if isinstance(self.retraction, str):
            self.retraction = RetractionKind.parse(self.retraction)
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.metric, Metric):
            raise ConfigError(f"metric must be a Metric instance, got {type(self.metric).__name__}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if not self.tol < self.theta:
            raise ConfigError(f"switching threshold theta={self.theta} must exceed tol={self.tol}")
        if self.mxit < 1:
            raise ConfigError("mxit must be positive")
        if self.stop_mode not in {"relative", "absolute"}:
            raise ConfigError(f"stop_mode must be 'relative' or 'absolute', got {self.stop_mode!r}")
        self.line_search.validate()
        self.newton.validate()


# ── Records ───────────────────────────────────────────────────────────────────

@dataclass
class IterationRecord:
    phase: str
    j: int
    f: float
    grad_norm: float
    step: float
    inner_iters: int
    feas: float
    wall_ns: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunReport:
    scheme: str
    status: str = STATUS_ERROR
    records: List[IterationRecord] = field(default_factory=list)
    X_star: Optional[np.ndarray] = field(default=None, repr=False)
    f_star: float = float("nan")
    grad_norm: float = float("nan")
    grad_norm0: float = float("nan")
    feas: float = float("nan")
    phase_iters: Dict[str, int] = field(default_factory=lambda: {PHASE_RGD: 0, PHASE_NEWTON: 0})
    phase_time_s: Dict[str, float] = field(default_factory=lambda: {PHASE_RGD: 0.0, PHASE_NEWTON: 0.0})
    gradient_fallbacks: int = 0
    krylov_fallbacks: int = 0
    message: str = ""

    @property
    def grad_norm_rel(self) -> float:
        if not self.grad_norm0:
            return 0.0
        return self.grad_norm / self.grad_norm0

    @property
    def total_iters(self) -> int:
        return sum(self.phase_iters.values())

    def history_frame(self) -> pd.DataFrame:
        ref = self.grad_norm0 or 1.0
        rows = [
            {
                "j": r.j,
                "phase": r.phase,
                "f": r.f,
                "grad_norm_rel": r.grad_norm / ref,
                "step": r.step,
                "inner_iters": r.inner_iters,
                "feas": r.feas,
                "wall_ns": r.wall_ns,
            }
            for r in self.records
        ]
        return pd.DataFrame(rows, columns=["j", "phase", "f", "grad_norm_rel", "step", "inner_iters", "feas", "wall_ns"])

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "status": self.status,
            "f_star": self.f_star,
            "grad_norm": self.grad_norm,
            "grad_norm_rel": self.grad_norm_rel,
            "feas": self.feas,
            "phase_iters": dict(self.phase_iters),
            "phase_time_s": dict(self.phase_time_s),
            "gradient_fallbacks": self.gradient_fallbacks,
            "krylov_fallbacks": self.krylov_fallbacks,
            "message": self.message,
        }


# ── Shared run state ──────────────────────────────────────────────────────────

@dataclass
class _State:
    point: SymplecticPoint
    f: float
    egrad: np.ndarray
    grad: np.ndarray
    gnorm: float


class _Run:
    """Bookkeeping shared by the phases of one optimizer call."""

    def __init__(self, cfg: OptimizerConfig, problem: Problem, scheme: str):
        self.cfg = cfg
        self.problem = problem
        self.cost = problem.cost
        self.metric = cfg.metric
        self.report = RunReport(scheme=scheme)
        self.t0 = time.perf_counter_ns()
        self.j = 0
        self.last_state: Optional[_State] = None

    def evaluate(self, point: SymplecticPoint) -> _State:
        egrad = self.cost.egrad(point.X)
        grad = self.metric.gradient(point, egrad)
        self.last_state = _State(point, self.cost.value(point.X), egrad, grad, self.metric.norm(point, grad))
        return self.last_state

    def start(self, X0) -> _State:
        point = as_point(X0 if X0 is not None else self.problem.x0)
        state = self.evaluate(point)
        self.report.grad_norm0 = state.gnorm
        self.record(PHASE_INIT, state, 0.0, 0)
        return state

    def target(self, factor: float) -> float:
        ref = self.report.grad_norm0 if self.cfg.stop_mode == "relative" else 1.0
        return factor * ref

    def record(self, phase: str, state: _State, step: float, inner: int) -> None:
        self.report.records.append(
            IterationRecord(
                phase=phase,
                j=self.j,
                f=state.f,
                grad_norm=state.gnorm,
                step=step,
                inner_iters=inner,
                feas=state.point.feas,
                wall_ns=time.perf_counter_ns() - self.t0,
            )
        )

    def retract_fn(self, point: SymplecticPoint, Z: np.ndarray):
        kind = self.cfg.retraction
        return lambda gamma: retract(kind, point, gamma * Z)

    def finish(self, state: _State, status: str, message: str = "") -> RunReport:
        rep = self.report
        rep.status = status
        rep.X_star = state.point.X
        rep.f_star = state.f
        rep.grad_norm = state.gnorm
        rep.feas = state.point.feas
        rep.message = message
        logger.info(
            "%s finished: %s after %d iterations, f=%.6e, ‖grad‖=%.3e",
            rep.scheme, status, rep.total_iters, state.f, state.gnorm,
        )
        return rep


# ── Phases ────────────────────────────────────────────────────────────────────

def _rgd_phase(run: _Run, state: _State, target: float) -> tuple[_State, str]:
    params = run.cfg.line_search
    search = NonmonotoneLineSearch(params.alpha, params.beta, params.delta, params.gamma_min, params.gamma_max)
    search.reset(state.f)
    gamma = params.gamma0
    it = 0
    t_start = time.perf_counter()
    try:
        while state.gnorm > target:
            if it >= run.cfg.mxit:
                return state, STATUS_MAX_ITER
            Z = -state.grad
            slope = -state.gnorm ** 2
            reference = search.reference
            res = search.search(run.retract_fn(state.point, Z), run.cost, slope, gamma)
            if not res.accepted:
                logger.warning("RGD step underflow at j=%d (γ < %.1e)", run.j, params.gamma_min)
                return state, STATUS_STAGNATED
            if res.f > reference + params.beta * res.step * slope:
                raise InvariantError(f"accepted RGD step violates the non-monotone condition at j={run.j}")

            new_state = run.evaluate(res.point)
            search.update(new_state.f)
            gamma = barzilai_borwein_step(
                new_state.point.X - state.point.X,
                new_state.grad - state.grad,
                it,
                gamma_fallback=params.gamma0,
                gamma_min=params.gamma_min,
                gamma_max=params.gamma_max,
            )
            state = new_state
            it += 1
            run.j += 1
            run.report.phase_iters[PHASE_RGD] += 1
            run.record(PHASE_RGD, state, res.step, 0)
        return state, STATUS_CONVERGED
    finally:
        run.report.phase_time_s[PHASE_RGD] += time.perf_counter() - t_start


def _newton_direction(run: _Run, op: HessianOperator, inexact: bool) -> tuple[np.ndarray, NewtonSolveReport]:
    params = run.cfg.newton
    metric = run.metric
    direct = not inexact and not isinstance(metric, CanonicalLikeMetric)
    if direct and op.point.dims.ambient_size > config.DIRECT_MAX_SIZE:
        if run.report.phase_iters[PHASE_NEWTON] == 0:
            logger.info(
                "saddle system too large (4nk=%d > %d); exact Newton goes through Krylov",
                op.point.dims.ambient_size, config.DIRECT_MAX_SIZE,
            )
        direct = False
    if direct:
        try:
            direction, sub = solve_newton_direct(metric, op.point, run.cost, hessian=op)
            return direction.Z, sub
        except DirectSolveError as exc:
            logger.warning("direct Newton solve failed at j=%d (%s); using Krylov", run.j, exc)
            run.report.krylov_fallbacks += 1
    if inexact:
        eta, mu, cap = params.eta, params.mu, params.max_inner
    else:
        eta, mu, cap = config.EXACT_KRYLOV_ETA, 1.0, op.point.dims.dim
    direction, sub = solve_newton_krylov(metric, op.point, run.cost, eta=eta, mu=mu, max_inner=cap, hessian=op)
    return direction.Z, sub


def _newton_phase(run: _Run, state: _State, target: float, inexact: bool) -> tuple[_State, str]:
    params = run.cfg.newton
    metric = run.metric
    it = 0
    best, since_best = state.gnorm, 0
    t_start = time.perf_counter()
    try:
        while state.gnorm > target:
            if it >= run.cfg.mxit:
                return state, STATUS_MAX_ITER
            if since_best >= config.NEWTON_STALL_WINDOW:
                logger.warning(
                    "Newton stagnated at j=%d: ‖grad‖=%.3e, no %.0f%% decrease in %d iterations",
                    run.j, state.gnorm, 100 * (1 - config.NEWTON_STALL_RATIO), since_best,
                )
                return state, STATUS_STAGNATED
            op = HessianOperator(metric, state.point, run.cost, egrad=state.egrad)
            Z, sub = _newton_direction(run, op, inexact)
            inner = sub.iterations

            if sub.status == "breakdown" and sub.residual_norm > config.NEWTON_ETA * state.gnorm:
                logger.warning(
                    "MINRES broke down at j=%d (residual %.2e > target %.2e); using −grad",
                    run.j, sub.residual_norm, sub.forcing_target,
                )
                use_gradient = True
            else:
                slope = metric.inner(state.point, state.grad, Z)
                znorm = metric.norm(state.point, Z)
                use_gradient = not np.isfinite(slope) or slope > -config.DESCENT_TOL * znorm * state.gnorm
                if use_gradient:
                    logger.warning("Newton direction is not a descent direction at j=%d; using −grad", run.j)
            if use_gradient:
                run.report.gradient_fallbacks += 1
                Z = -state.grad
                slope = -state.gnorm ** 2

            if params.damping:
                res = monotone_backtracking(
                    run.retract_fn(state.point, Z),
                    run.cost,
                    state.f,
                    slope,
                    gamma=1.0,
                    beta=run.cfg.line_search.beta,
                    delta=params.damping_delta,
                    gamma_min=run.cfg.line_search.gamma_min,
                )
                if not res.accepted:
                    logger.warning("damped Newton step underflow at j=%d", run.j)
                    return state, STATUS_STAGNATED
                if res.f > state.f:
                    raise InvariantError(f"damped Newton step increased f: {res.f:.6e} > {state.f:.6e}")
                new_point, step = res.point, res.step
            else:
                try:
                    new_point, step = retract(run.cfg.retraction, state.point, Z), 1.0
                except RetractionDomainError as exc:
                    logger.warning("undamped Newton step left the retraction domain at j=%d: %s", run.j, exc)
                    return state, STATUS_STAGNATED

            state = run.evaluate(new_point)
            if state.gnorm <= config.NEWTON_STALL_RATIO * best:
                best, since_best = state.gnorm, 0
            else:
                since_best += 1
            it += 1
            run.j += 1
            run.report.phase_iters[PHASE_NEWTON] += 1
            run.record(PHASE_NEWTON, state, step, inner)
        return state, STATUS_CONVERGED
    finally:
        run.report.phase_time_s[PHASE_NEWTON] += time.perf_counter() - t_start


# ── Drivers ───────────────────────────────────────────────────────────────────

def scheme_name(method: str, cfg: OptimizerConfig) -> str:
    metric = cfg.metric
    label = metric.label
    if isinstance(metric, CanonicalLikeMetric) and metric.rho != 1.0:
        label = f"c({metric.rho:g})"
    return f"{method}-{cfg.retraction.value}-{label}"


def _guarded(run: _Run, state: _State, body) -> RunReport:
    try:
        state, status = body(state)
    except SymplecticError as exc:
        logger.error("%s aborted: %s", run.report.scheme, exc)
        return run.finish(run.last_state, STATUS_ERROR, message=f"{type(exc).__name__}: {exc}")
    except NUMERICAL_FAILURES as exc:
        logger.exception("%s aborted by a numerical failure", run.report.scheme)
        return run.finish(run.last_state, STATUS_ERROR, message=f"{type(exc).__name__}: {exc}")
    return run.finish(state, status)


def rgd(cfg: OptimizerConfig, problem: Problem, X0=None) -> RunReport:
    run = _Run(cfg, problem, scheme_name("RGD", cfg))
    state = run.start(X0)

    def body(s: _State):
        return _rgd_phase(run, s, run.target(cfg.tol))

    return _guarded(run, state, body)


def newton(cfg: OptimizerConfig, problem: Problem, X0=None, inexact: bool = False) -> RunReport:
    run = _Run(cfg, problem, scheme_name("RiN" if inexact else "RN", cfg))
    state = run.start(X0)

    def body(s: _State):
        return _newton_phase(run, s, run.target(cfg.tol), inexact)

    return _guarded(run, state, body)


def hybrid(cfg: OptimizerConfig, problem: Problem, X0=None, second_phase: str = "RN") -> RunReport:
    """
    Phase 1 RGD to θ·‖grad(X0)‖, phase 2 Newton to tol·‖grad(X0)‖. If phase 1
    ends without reaching the switching threshold the run stops with
    status switch-failed.
    """
    if second_phase not in {"RN", "RiN"}:
        raise ConfigError(f"second phase must be 'RN' or 'RiN', got {second_phase!r}")
    inexact = second_phase == "RiN"
    run = _Run(cfg, problem, scheme_name("h" + second_phase, cfg))
    state = run.start(X0)

    def body(s: _State):
        s, status = _rgd_phase(run, s, run.target(cfg.theta))
        if status != STATUS_CONVERGED:
            logger.warning("hybrid switch failed: phase 1 ended with %s at ‖grad‖=%.3e", status, s.gnorm)
            return s, STATUS_SWITCH_FAILED
        return _newton_phase(run, s, run.target(cfg.tol), inexact)

    return _guarded(run, state, body)


METHODS = {
    "RGD": lambda cfg, problem, X0=None: rgd(cfg, problem, X0),
    "RN": lambda cfg, problem, X0=None: newton(cfg, problem, X0, inexact=False),
    "RiN": lambda cfg, problem, X0=None: newton(cfg, problem, X0, inexact=True),
    "hRN": lambda cfg, problem, X0=None: hybrid(cfg, problem, X0, second_phase="RN"),
    "hRiN": lambda cfg, problem, X0=None: hybrid(cfg, problem, X0, second_phase="RiN"),
}


def run_method(method: str, cfg: OptimizerConfig, problem: Problem, X0=None) -> RunReport:
    try:
        driver = METHODS[method]
    except KeyError:
        raise ConfigError(f"unknown method {method!r}; expected one of {sorted(METHODS)}") from None
    return driver(cfg, problem, X0)
