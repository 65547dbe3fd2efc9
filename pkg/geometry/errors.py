"""
Exception hierarchy shared by the geometry, solver and bench layers.
"""

from __future__ import annotations

import numpy as np


class SymplecticError(Exception):
    """Base class for every error raised by this library."""


class DimensionError(SymplecticError, ValueError):
    """Shapes do not conform (odd row count, non-square input, mismatched blocks)."""


class InvariantError(SymplecticError):
    """An input violates a structural invariant (skewness, tangency, feasibility)."""


class DefinitenessError(SymplecticError):
    """A matrix that must be symmetric positive definite is not."""


class SRBreakdownError(SymplecticError):
    """Symplectic Gram–Schmidt hit a (near) zero pivot."""


class FrameError(SymplecticError):
    """The complement frame X_⊥ could not be built (rank collapse)."""


class WrongMetricError(SymplecticError):
    """An operation was called with a metric it does not support."""


class RetractionDomainError(SymplecticError):
    """The retraction is undefined at the requested step; callers shrink the step."""


class DirectSolveError(SymplecticError):
    """The vectorized saddle-point system (or its Schur complement) is singular."""


class ConfigError(SymplecticError, ValueError):
    """Invalid optimizer or experiment configuration."""


# Failures raised inside numpy/scipy kernels (singular factorizations,
# exhausted memory on large assemblies, overflow) rather than by this library.
NUMERICAL_FAILURES = (np.linalg.LinAlgError, MemoryError, ArithmeticError)
