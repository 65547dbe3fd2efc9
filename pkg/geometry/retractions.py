"""
Retractions on Sp(2k, 2n): economical Cayley and SR.
"""

from __future__ import annotations

import logging
from enum import Enum

import numpy as np
import scipy.linalg

import config
from geometry.errors import ConfigError, InvariantError, RetractionDomainError, SRBreakdownError
from geometry.linalg import sr_decompose
from geometry.manifold import SymplecticPoint, apply_J, apply_JT, as_array, as_point, feasibility

logger = logging.getLogger(__name__)


class RetractionKind(str, Enum):
    CAYLEY = "Cay"
    SR = "SR"

    @classmethod
    def parse(cls, token: str) -> "RetractionKind":
        for kind in cls:
            if token.strip().lower() in {kind.value.lower(), kind.name.lower()}:
                return kind
        raise ConfigError(f"unknown retraction {token!r}")


def _cayley(point: SymplecticPoint, Z: np.ndarray) -> np.ndarray:
    # −X + (P_X Z + 2X)(I + ¼ J_{2k}^T Z^T J_{2n} (P_X Z + 2X))^{-1}
    X = point.X
    V = point.apply_P(Z) + 2.0 * X
    inner = np.eye(2 * point.k) + 0.25 * apply_JT(Z.T @ apply_J(V))
    if np.linalg.cond(inner) > config.SINGULAR_COND:
        raise RetractionDomainError("Cayley inner matrix is singular")
    try:
        # V K^{-1} = (K^{-T} V^T)^T
        return -X + scipy.linalg.solve(inner.T, V.T).T
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise RetractionDomainError(f"Cayley solve failed: {exc}") from exc


def _sr(point: SymplecticPoint, Z: np.ndarray) -> np.ndarray:
    try:
        return sr_decompose(point.X + Z).S
    except SRBreakdownError as exc:
        raise RetractionDomainError(f"SR retraction undefined: {exc}") from exc


def retract(
    kind: RetractionKind | str,
    X,
    Z,
    feas_tol: float = config.RETRACTION_FEAS_TOL,
) -> SymplecticPoint:
    """
    R_X(Z) for the chosen retraction.

    Outputs whose feasibility drifts above ``feas_tol`` get one SR pass and
    come back with ``repaired=True``.
    """
    kind = RetractionKind.parse(kind) if isinstance(kind, str) else kind
    point = as_point(X)
    Z = as_array(Z)
    if not np.any(Z):
        return point
    if not np.all(np.isfinite(Z)):
        raise RetractionDomainError("non-finite step")

    Y = _cayley(point, Z) if kind is RetractionKind.CAYLEY else _sr(point, Z)
    if not np.all(np.isfinite(Y)):
        raise RetractionDomainError("retraction produced non-finite entries")

    drift = feasibility(Y)
    if drift <= feas_tol:
        return SymplecticPoint(Y, check=False)

    logger.info("%s retraction drift %.2e > %.0e, re-symplecticizing", kind.value, drift, feas_tol)
    try:
        Y = sr_decompose(Y).S
    except SRBreakdownError as exc:
        raise RetractionDomainError(f"re-symplecticization failed: {exc}") from exc
    try:
        return SymplecticPoint(Y, feas_tol=config.FEAS_TOL, repaired=True)
    except InvariantError as exc:
        raise RetractionDomainError(str(exc)) from exc
