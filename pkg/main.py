"""
Command-line entry point for the Riemannian optimization bench on the
symplectic Stiefel manifold.

Subcommands:
  run <config>   run every scheme of an experiment config, write CSV/JSON/history
  check          quick acceptance checks (oracles, solvers, invariants, least squares)
  gen            write the example experiment configs

Exit code 0 only if every scheme (or check) finished without error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

import config
from bench.acceptance import CHECKS, run_checks
from bench.experiment import ExperimentConfig
from bench.suite import run_suite
from geometry.errors import SymplecticError

# ── Helpers ───────────────────────────────────────────────────────────────────

def _save_json(data: Any, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, ensure_ascii=False)
    print(f"[IO] Saved → {path}")


def _banner(title: str) -> None:
    print("\n" + "═" * 60)
    print(f"  {title}")
    print("═" * 60)


# ── Example configs ───────────────────────────────────────────────────────────

_HYBRID_SCHEMES = {
    "methods": ["RGD", "hRN", "hRiN"],
    "metrics": ["M", "e", "c"],
    "retractions": ["SR", "Cay"],
}

EXAMPLE_CONFIGS: Dict[str, Dict[str, Any]] = {
    "least_squares": {
        "problem": {"family": "least_squares", "seed": 0, "params": {"n": 50, "k": 6}},
        "schemes": _HYBRID_SCHEMES,
        "stopping": {"tol": 1e-10, "theta": 1e-4, "mxit": 5000, "stop_mode": "relative"},
        "output": {"dir": os.path.join(config.RESULTS_DIR, "least_squares")},
    },
    "least_squares_sparse": {
        "problem": {"family": "least_squares_sparse", "seed": 0, "params": {"grid": 20, "k": 10}},
        "schemes": {"methods": ["hRiN"], "metrics": ["M", "e"], "retractions": ["SR", "Cay"]},
        "stopping": {"tol": 1e-8, "theta": 1e-3, "mxit": 5000},
        "output": {"dir": os.path.join(config.RESULTS_DIR, "least_squares_sparse")},
    },
    "trace": {
        "problem": {"family": "trace", "seed": 0, "params": {"n": 200, "k": 5}},
        "schemes": {"methods": ["RGD", "hRiN"], "metrics": ["M", "e", "c"], "retractions": ["SR", "Cay"]},
        "stopping": {"tol": 1e-8, "theta": 1e-3, "mxit": 2000},
        "output": {"dir": os.path.join(config.RESULTS_DIR, "trace")},
    },
    "gyroscopic": {
        "problem": {"family": "gyroscopic", "seed": 0, "params": {"n": 200, "k": 5}},
        "schemes": {"methods": ["RGD", "hRiN"], "metrics": ["M", "e"], "retractions": ["SR"]},
        "stopping": {"tol": 1e-8, "theta": 1e-3, "mxit": 2000},
        "output": {"dir": os.path.join(config.RESULTS_DIR, "gyroscopic")},
    },
    "quartic": {
        "problem": {"family": "quartic", "seed": 0, "params": {"n": 20}},
        "schemes": {"methods": ["RGD", "hRN", "hRiN"], "metrics": ["e", "c"], "retractions": ["SR", "Cay"]},
        "stopping": {"tol": 1e-11, "theta": 1e-7, "mxit": 5000},
        "output": {"dir": os.path.join(config.RESULTS_DIR, "quartic")},
    },
}


# ── Subcommands ───────────────────────────────────────────────────────────────

def cmd_run(path: str, workers: Optional[int] = None, out_dir: Optional[str] = None) -> int:
    _banner("SYMPLECTIC STIEFEL OPTIMIZATION SUITE")
    try:
        exp = ExperimentConfig.load(path)
        if workers is not None:
            exp.workers = workers
        if out_dir is not None:
            exp.output.dir = out_dir
        exp.validate()
        print(f"[Setup] Loaded {path}: {len(exp.schemes)} scheme(s)")
        suite = run_suite(exp)
    except (SymplecticError, OSError) as exc:
        print(f"[Error] {type(exc).__name__}: {exc}")
        return 2
    suite.print_summary()
    _banner("SUITE COMPLETE" if suite.all_ok else "SUITE FINISHED WITH ERRORS")
    return 0 if suite.all_ok else 1


def cmd_check(only: Optional[List[str]] = None) -> int:
    _banner("ACCEPTANCE CHECKS")
    unknown = [name for name in (only or []) if name not in CHECKS]
    if unknown:
        print(f"[Check] Unknown check(s): {unknown}; available: {sorted(CHECKS)}")
        return 2
    results = run_checks(only)
    passed = sum(r.passed for r in results)
    print(f"\n[Check] {passed}/{len(results)} passed")
    _save_json([r.to_dict() for r in results], os.path.join(config.RESULTS_DIR, "acceptance.json"))
    return 0 if passed == len(results) else 1


def cmd_gen(directory: str = config.CONFIGS_DIR) -> int:
    os.makedirs(directory, exist_ok=True)
    for name, data in EXAMPLE_CONFIGS.items():
        ExperimentConfig.from_dict(data, name=name)
        _save_json({"name": name, **data}, os.path.join(directory, f"{name}.json"))
    print(f"[Gen] Wrote {len(EXAMPLE_CONFIGS)} configs to '{directory}'")
    return 0


# ── Main ──────────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Riemannian optimization on the symplectic Stiefel manifold")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", help="path to a JSON experiment config")
    run.add_argument("--workers", type=int, default=None, help="parallel worker processes")
    run.add_argument("--out", default=None, help="override the output directory")

    check = sub.add_parser("check", help="quick acceptance checks")
    check.add_argument("--only", nargs="*", default=None, help=f"subset of {sorted(CHECKS)}")

    gen = sub.add_parser("gen", help="write example configs")
    gen.add_argument("--dir", default=config.CONFIGS_DIR)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=config.LOG_LEVEL, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, workers=args.workers, out_dir=args.out)
    if args.command == "check":
        return cmd_check(args.only)
    return cmd_gen(args.dir)


if __name__ == "__main__":
    sys.exit(main())
