"""
Suite runner: every scheme of an experiment on one problem, optionally in
parallel worker processes, with summary CSV/JSON and per-scheme histories.
"""

from __future__ import annotations

import json
import logging
import multiprocessing as mp
import os
from typing import Any, List, Optional, Tuple

from tqdm import tqdm

from bench.experiment import ExperimentConfig, SchemeSpec, build_problem
from data.problems import Problem
from evaluation.report import SchemeResult, SuiteReport
from geometry.errors import NUMERICAL_FAILURES, SymplecticError
from solvers.optimizers import run_method

logger = logging.getLogger(__name__)


def _save_json(data: Any, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, ensure_ascii=False, default=float)
    print(f"[IO] Saved → {path}")


def run_scheme(exp: ExperimentConfig, scheme: SchemeSpec, problem: Problem) -> SchemeResult:
    """One scheme on one problem; failures come back as an 'error' row."""
    try:
        cfg = exp.optimizer_config(scheme, problem)
        report = run_method(scheme.method, cfg, problem, problem.x0)
    except SymplecticError as exc:
        logger.error("scheme %s failed: %s", scheme.name, exc)
        return SchemeResult.failed(scheme.name, f"{type(exc).__name__}: {exc}")
    except NUMERICAL_FAILURES as exc:
        logger.exception("scheme %s failed numerically", scheme.name)
        return SchemeResult.failed(scheme.name, f"{type(exc).__name__}: {exc}")
    report.scheme = scheme.name
    rel = problem.rel_dist_to_known_min(report.X_star) if report.X_star is not None else None
    return SchemeResult.from_run(report, rel_dist=rel)


# ── Worker processes ──────────────────────────────────────────────────────────

def _init_worker():
    os.environ["OMP_NUM_THREADS"] = "1"


def _scheme_worker(args: Tuple[dict, str]) -> SchemeResult:
    # Each worker regenerates the (seeded) problem instead of unpickling it
    exp_dict, scheme_name = args
    exp = ExperimentConfig.from_dict(exp_dict)
    scheme = SchemeSpec.parse(scheme_name)
    try:
        problem = build_problem(exp.problem)
    except (SymplecticError, *NUMERICAL_FAILURES) as exc:
        return SchemeResult.failed(scheme.name, f"{type(exc).__name__}: {exc}")
    return run_scheme(exp, scheme, problem)


def _run_parallel(exp: ExperimentConfig) -> List[SchemeResult]:
    jobs = [(exp.to_dict(), s.name) for s in exp.schemes]
    with mp.Pool(exp.workers, initializer=_init_worker) as pool:
        return list(tqdm(pool.imap(_scheme_worker, jobs), total=len(jobs), desc="Schemes", unit="scheme"))


# ── Suite ─────────────────────────────────────────────────────────────────────

def run_suite(exp: ExperimentConfig, problem: Optional[Problem] = None, write: bool = True) -> SuiteReport:
    """
    Run every scheme of ``exp`` and write the summary CSV, summary JSON and
    history CSVs under ``exp.output.dir``. An empty scheme list yields a
    header-only CSV.
    """
    problem = problem or build_problem(exp.problem)
    suite = SuiteReport(problem=problem.to_dict())
    print(f"[Suite] {exp.name}: {len(exp.schemes)} scheme(s) on {problem.label or problem.name} "
          f"(n={problem.dims.n}, k={problem.dims.k}, workers={exp.workers})")

    if exp.workers > 1 and len(exp.schemes) > 1:
        suite.results = _run_parallel(exp)
    else:
        for scheme in tqdm(exp.schemes, desc="Schemes", unit="scheme"):
            suite.results.append(run_scheme(exp, scheme, problem))

    for r in suite.results:
        print(f"  [Run] {r.scheme:<16} {r.status:<15} #it={r.phase1_iters}+{r.phase2_iters}  f_*={r.f_star:.6e}")

    if write:
        out = exp.output
        os.makedirs(out.dir, exist_ok=True)
        suite.write_csv(out.path(out.summary_csv))
        suite.write_histories(out.path(out.history_dir))
        _save_json({"config": exp.to_dict(), **suite.to_dict()}, out.path(out.summary_json))
    return suite
