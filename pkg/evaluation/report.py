"""
Suite-level result tables and convergence-rate fits.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from solvers.optimizers import PHASE_NEWTON, PHASE_RGD, STATUS_ERROR, RunReport

SUMMARY_COLUMNS = [
    "scheme",
    "phase1_iters",
    "phase2_iters",
    "phase1_time_s",
    "phase2_time_s",
    "f_star",
    "grad_norm",
    "rel_dist_to_known_min",
    "feas",
    "status",
]

HISTORY_COLUMNS = ["j", "phase", "f", "grad_norm_rel", "step", "inner_iters", "feas", "wall_ns"]


@dataclass
class SchemeResult:
    scheme: str
    phase1_iters: int
    phase2_iters: int
    phase1_time_s: float
    phase2_time_s: float
    f_star: float
    grad_norm: float
    rel_dist_to_known_min: Optional[float]
    feas: float
    status: str
    message: str = ""
    history: Optional[pd.DataFrame] = field(default=None, repr=False)

    @classmethod
    def from_run(cls, run: RunReport, rel_dist: Optional[float] = None) -> "SchemeResult":
        """Phase 1 is RGD, phase 2 is Newton; single-phase runs fill only one side."""
        return cls(
            scheme=run.scheme,
            phase1_iters=run.phase_iters[PHASE_RGD],
            phase2_iters=run.phase_iters[PHASE_NEWTON],
            phase1_time_s=run.phase_time_s[PHASE_RGD],
            phase2_time_s=run.phase_time_s[PHASE_NEWTON],
            f_star=run.f_star,
            grad_norm=run.grad_norm,
            rel_dist_to_known_min=rel_dist,
            feas=run.feas,
            status=run.status,
            message=run.message,
            history=run.history_frame(),
        )

    @classmethod
    def failed(cls, scheme: str, message: str) -> "SchemeResult":
        nan = float("nan")
        return cls(scheme, 0, 0, 0.0, 0.0, nan, nan, None, nan, STATUS_ERROR, message=message)

    @property
    def ok(self) -> bool:
        return self.status != STATUS_ERROR

    def row(self) -> Dict[str, Any]:
        return {c: getattr(self, c) for c in SUMMARY_COLUMNS}

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("history")
        return d


@dataclass
class SuiteReport:
    problem: Dict[str, Any] = field(default_factory=dict)
    results: List[SchemeResult] = field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return all(r.ok for r in self.results)

    @property
    def status_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for r in self.results:
            counts[r.status] = counts.get(r.status, 0) + 1
        return counts

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.row() for r in self.results], columns=SUMMARY_COLUMNS)

    def write_csv(self, path: str) -> str:
        self.to_frame().to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
        print(f"[IO] Saved → {path}")
        return path

    def write_histories(self, directory: str) -> List[str]:
        os.makedirs(directory, exist_ok=True)
        paths = []
        for r in self.results:
            if r.history is None:
                continue
            path = os.path.join(directory, f"{r.scheme}.csv")
            r.history.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
            paths.append(path)
        if paths:
            print(f"[IO] Saved {len(paths)} histories → {directory}")
        return paths

    def print_summary(self) -> None:
        print("\n" + "═" * 60)
        print("SUITE SUMMARY")
        print("═" * 60)
        label = self.problem.get("label") or self.problem.get("name", "?")
        print(f"Problem        : {label}  (n={self.problem.get('n')}, k={self.problem.get('k')})")
        print(f"Schemes run    : {len(self.results)}")
        print(f"Statuses       : {self.status_counts}")
        print()
        print(f"  {'scheme':<16} {'#it1':>6} {'#it2':>5} {'time':>8} {'f_*':>13} {'‖grad‖':>10} {'feas':>9}  status")
        for r in self.results:
            total = r.phase1_time_s + r.phase2_time_s
            print(
                f"  {r.scheme:<16} {r.phase1_iters:>6} {r.phase2_iters:>5} {total:>8.3f} "
                f"{r.f_star:>13.6e} {r.grad_norm:>10.2e} {r.feas:>9.1e}  {r.status}"
            )
        print("═" * 60)

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "all_ok": self.all_ok,
            "status_counts": self.status_counts,
            "results": [r.to_dict() for r in self.results],
        }


# ── Convergence order ─────────────────────────────────────────────────────────

def fit_convergence_order(residuals: Sequence[float], last: int = 4) -> float:
    """
    Slope of log r_{j+1} against log r_j over the final ``last`` residuals.

    About 2 for quadratic convergence, 1 + μ for a forcing exponent μ.
    Zero residuals are dropped.
    """
    r = np.asarray([x for x in residuals if x > 0 and np.isfinite(x)], dtype=float)
    r = r[-last:]
    if r.size < 3:
        raise ValueError(f"need at least 3 positive residuals for a rate fit, got {r.size}")
    x, y = np.log(r[:-1]), np.log(r[1:])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
