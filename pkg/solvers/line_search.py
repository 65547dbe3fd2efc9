"""
Step-size control along a retraction curve.

NonmonotoneLineSearch keeps a Zhang–Hager reference value
c_{j+1} = (α Q_j c_j + f_{j+1}) / Q_{j+1}, Q_{j+1} = α Q_j + 1, and accepts
γ once f(R(γZ)) ≤ c_j + β γ g(grad, Z). With α = 0 the reference is the
current value and the search is plain monotone Armijo backtracking.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

import config
from geometry.errors import RetractionDomainError
from geometry.manifold import SymplecticPoint

logger = logging.getLogger(__name__)

RetractFn = Callable[[float], SymplecticPoint]
CostFn = Callable[[np.ndarray], float]


@dataclass
class StepResult:
    accepted: bool
    step: float
    point: Optional[SymplecticPoint] = None
    f: Optional[float] = None
    trials: int = 0
    domain_errors: int = 0


class NonmonotoneLineSearch:
    def __init__(
        self,
        alpha: float = config.LS_ALPHA,
        beta: float = config.LS_BETA,
        delta: float = config.LS_DELTA,
        gamma_min: float = config.LS_GAMMA_MIN,
        gamma_max: float = config.LS_GAMMA_MAX,
    ):
        self.alpha = alpha
        self.beta = beta
        self.delta = delta
        self.gamma_min = gamma_min
        self.gamma_max = gamma_max
        self.Q = 1.0
        self.c = np.inf

    def reset(self, f0: float) -> None:
        self.Q = 1.0
        self.c = f0

    @property
    def reference(self) -> float:
        return self.c

    def update(self, f_new: float) -> None:
        Q_new = self.alpha * self.Q + 1.0
        self.c = (self.alpha * self.Q * self.c + f_new) / Q_new
        self.Q = Q_new

    def search(self, retract: RetractFn, cost: CostFn, slope: float, gamma: float) -> StepResult:
        """
        Backtrack from ``gamma`` until the sufficient-decrease test holds.

        ``slope`` is g(grad, Z) < 0. Retraction domain errors count as a
        rejected trial.
        """
        gamma = float(np.clip(gamma, self.gamma_min, self.gamma_max))
        trials = domain_errors = 0
        while gamma >= self.gamma_min:
            trials += 1
            try:
                candidate = retract(gamma)
            except RetractionDomainError as exc:
                domain_errors += 1
                logger.debug("step %.3e outside retraction domain: %s", gamma, exc)
                gamma *= self.delta
                continue
            f_new = cost(candidate.X)
            if np.isfinite(f_new) and f_new <= self.c + self.beta * gamma * slope:
                return StepResult(True, gamma, candidate, f_new, trials, domain_errors)
            gamma *= self.delta
        return StepResult(False, gamma, trials=trials, domain_errors=domain_errors)


def monotone_backtracking(
    retract: RetractFn,
    cost: CostFn,
    f0: float,
    slope: float,
    gamma: float = 1.0,
    beta: float = config.LS_BETA,
    delta: float = config.DAMPING_DELTA,
    gamma_min: float = config.LS_GAMMA_MIN,
) -> StepResult:
    """Armijo backtracking against f0, trying ``gamma`` first (unit Newton step)."""
    search = NonmonotoneLineSearch(alpha=0.0, beta=beta, delta=delta, gamma_min=gamma_min, gamma_max=max(gamma, 1.0))
    search.reset(f0)
    return search.search(retract, cost, slope, gamma)


def barzilai_borwein_step(
    S: np.ndarray,
    Y: np.ndarray,
    j: int,
    gamma_fallback: float = config.LS_GAMMA0,
    gamma_min: float = config.LS_GAMMA_MIN,
    gamma_max: float = config.LS_GAMMA_MAX,
) -> float:
    """
    Alternating BB1 (odd j) / BB2 (even j) step from iterate and gradient differences.

    S = X_{j+1} − X_j and Y = grad_{j+1} − grad_j are ambient differences paired
    with the Frobenius inner product; grad_j is not transported and the metric
    g_X does not enter. |⟨S, Y⟩| keeps the step positive.
    """
    sy = abs(float(np.sum(S * Y)))
    if sy == 0.0 or not np.isfinite(sy):
        return gamma_fallback
    if j % 2:
        gamma = float(np.sum(S * S)) / sy
    else:
        gamma = sy / float(np.sum(Y * Y))
    if not np.isfinite(gamma):
        return gamma_fallback
    return float(np.clip(gamma, gamma_min, gamma_max))
