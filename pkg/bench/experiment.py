"""
Experiment configuration: JSON ingestion, validation, scheme expansion and
problem construction.

A config file has the sections

    problem      {"family": ..., "seed": ..., "params": {...}}
                 or {"family": "matrix_market", "cost": "least_squares" | "trace" | "quartic",
                     "A": path, "B": path, "k": int, "x0": path}
    schemes      {"methods": [...], "metrics": [...], "retractions": [...]}
                 and/or {"list": ["RGD-SR-M", ...]}
    stopping     {"tol", "theta", "mxit", "stop_mode"}
    line_search  {"alpha", "beta", "delta", "gamma0", "gamma_min", "gamma_max"}
    newton       {"eta", "mu", "max_inner", "damping_delta", "damping"}
    output       {"dir", "summary_csv", "summary_json", "history_dir"}
    workers      int
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import config
from data.generators import GENERATORS
from data.problems import Problem, least_squares_problem, quartic_trace_problem, trace_problem
from geometry.errors import ConfigError
from geometry.linalg import read_matrix
from geometry.manifold import SymplecticPoint, random_point
from geometry.metrics import make_metric
from geometry.retractions import RetractionKind
from solvers.optimizers import METHODS, LineSearchParams, NewtonParams, OptimizerConfig

SECTIONS = {"name", "problem", "schemes", "stopping", "line_search", "newton", "output", "workers"}
MATRIX_MARKET = "matrix_market"
FILE_COSTS = {"least_squares", "trace", "quartic"}


def _check_keys(section: str, data: Dict[str, Any], allowed) -> None:
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {sorted(unknown)}")


# ── Schemes ───────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SchemeSpec:
    method: str
    retraction: RetractionKind
    metric: str

    @property
    def name(self) -> str:
        return f"{self.method}-{self.retraction.value}-{self.metric}"

    @classmethod
    def parse(cls, name: str) -> "SchemeSpec":
        """'hRiN-SR-M' → (hRiN, SR, M). The metric part may be 'c(0.5)'."""
        parts = name.strip().split("-", 2)
        if len(parts) != 3:
            raise ConfigError(f"scheme {name!r} is not of the form <method>-<retraction>-<metric>")
        return cls.build(*parts)

    @classmethod
    def build(cls, method: str, retraction: str, metric: str) -> "SchemeSpec":
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}; expected one of {sorted(METHODS)}")
        if metric != "M":
            make_metric(metric)
        return cls(method, RetractionKind.parse(retraction), metric)


# ── Sections ──────────────────────────────────────────────────────────────────

@dataclass
class StoppingSection:
    tol: float = config.TOL
    theta: float = config.THETA
    mxit: int = config.MXIT
    stop_mode: str = "relative"


@dataclass
class OutputSection:
    dir: str = config.RESULTS_DIR
    summary_csv: str = "summary.csv"
    summary_json: str = "summary.json"
    history_dir: str = config.HISTORY_DIRNAME

    def path(self, name: str) -> str:
        return os.path.join(self.dir, name)


@dataclass
class ExperimentConfig:
    name: str
    problem: Dict[str, Any]
    schemes: List[SchemeSpec] = field(default_factory=list)
    stopping: StoppingSection = field(default_factory=StoppingSection)
    line_search: LineSearchParams = field(default_factory=LineSearchParams)
    newton: NewtonParams = field(default_factory=NewtonParams)
    output: OutputSection = field(default_factory=OutputSection)
    workers: int = config.WORKERS

    @classmethod
    def from_dict(cls, data: Dict[str, Any], name: Optional[str] = None) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("experiment config must be a JSON object")
        _check_keys("top level", data, SECTIONS)
        if "problem" not in data:
            raise ConfigError("experiment config needs a 'problem' section")

        problem = dict(data["problem"])
        family = problem.get("family")
        if family != MATRIX_MARKET and family not in GENERATORS:
            raise ConfigError(f"unknown problem family {family!r}; expected one of {sorted(GENERATORS) + [MATRIX_MARKET]}")
        if family == MATRIX_MARKET:
            _check_keys("problem", problem, {"family", "cost", "A", "B", "k", "x0", "seed", "label"})
            if problem.get("cost") not in FILE_COSTS:
                raise ConfigError(f"matrix_market problems need 'cost' in {sorted(FILE_COSTS)}")
        else:
            _check_keys("problem", problem, {"family", "params", "seed", "label"})

        raw_schemes = data.get("schemes", {})
        _check_keys("schemes", raw_schemes, {"methods", "metrics", "retractions", "list"})
        schemes = [
            SchemeSpec.build(m, r, g)
            for m in raw_schemes.get("methods", [])
            for r in raw_schemes.get("retractions", [])
            for g in raw_schemes.get("metrics", [])
        ]
        schemes += [SchemeSpec.parse(s) for s in raw_schemes.get("list", [])]
        seen, unique = set(), []
        for s in schemes:
            if s.name not in seen:
                seen.add(s.name)
                unique.append(s)

        def section(key, klass):
            raw = data.get(key, {})
            _check_keys(key, raw, klass.__dataclass_fields__)
            return klass(**raw)

        exp = cls(
            name=data.get("name") or name or str(family),
            problem=problem,
            schemes=unique,
            stopping=section("stopping", StoppingSection),
            line_search=section("line_search", LineSearchParams),
            newton=section("newton", NewtonParams),
            output=section("output", OutputSection),
            workers=int(data.get("workers", config.WORKERS)),
        )
        exp.validate()
        return exp

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        cfg = cls.from_dict(data, name=os.path.splitext(os.path.basename(path))[0])
        base = os.path.dirname(os.path.abspath(path))
        if cfg.problem.get("family") == MATRIX_MARKET:
            for key in ("A", "B", "x0"):
                value = cfg.problem.get(key)
                if value and not os.path.isabs(value):
                    cfg.problem[key] = os.path.join(base, value)
        return cfg

    def validate(self) -> None:
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.stopping.stop_mode not in {"relative", "absolute"}:
            raise ConfigError(f"stop_mode must be 'relative' or 'absolute', got {self.stopping.stop_mode!r}")
        if not 0 < self.stopping.tol < self.stopping.theta:
            raise ConfigError("need 0 < tol < theta")
        if self.stopping.mxit < 1:
            raise ConfigError("mxit must be positive")
        self.line_search.validate()
        self.newton.validate()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "problem": self.problem,
            "schemes": {"list": [s.name for s in self.schemes]},
            "stopping": asdict(self.stopping),
            "line_search": asdict(self.line_search),
            "newton": asdict(self.newton),
            "output": asdict(self.output),
            "workers": self.workers,
        }

    def optimizer_config(self, scheme: SchemeSpec, problem: Problem) -> OptimizerConfig:
        return OptimizerConfig(
            metric=make_metric(scheme.metric, weight=problem.metric_weight),
            retraction=scheme.retraction,
            tol=self.stopping.tol,
            mxit=self.stopping.mxit,
            theta=self.stopping.theta,
            stop_mode=self.stopping.stop_mode,
            line_search=self.line_search,
            newton=self.newton,
        )


# ── Problems ──────────────────────────────────────────────────────────────────

def build_problem(spec: Dict[str, Any]) -> Problem:
    family = spec["family"]
    seed = spec.get("seed", config.DEFAULT_SEED)
    if family == MATRIX_MARKET:
        problem = _problem_from_files(spec, seed)
    else:
        try:
            problem = GENERATORS[family](seed=seed, **spec.get("params", {}))
        except TypeError as exc:
            raise ConfigError(f"bad parameters for problem family {family!r}: {exc}") from exc
    if spec.get("label"):
        problem.label = spec["label"]
    return problem


def _problem_from_files(spec: Dict[str, Any], seed: int) -> Problem:
    A = read_matrix(spec["A"])
    cost = spec["cost"]
    if cost == "least_squares":
        problem = least_squares_problem(A, read_matrix(spec["B"]))
    elif cost == "quartic":
        problem = quartic_trace_problem(A, read_matrix(spec["B"]))
    else:
        if "k" not in spec:
            raise ConfigError("trace problems read from files need 'k'")
        problem = trace_problem(A, int(spec["k"]))
    if spec.get("x0"):
        problem.x0 = SymplecticPoint(read_matrix(spec["x0"]))
    else:
        problem.x0 = random_point(problem.dims, seed)
    problem.metadata.update({"family": MATRIX_MARKET, "source": os.path.basename(spec["A"])})
    return problem
