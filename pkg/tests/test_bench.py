import json
import os

import numpy as np
import pandas as pd
import pytest

import bench.suite as suite_module
import main
from bench.experiment import ExperimentConfig, SchemeSpec, build_problem
from bench.suite import run_suite
from evaluation.report import HISTORY_COLUMNS, SUMMARY_COLUMNS, fit_convergence_order
from evaluation.visualizer import load_history, load_histories, plot_convergence
from geometry.errors import ConfigError
from geometry.linalg import write_matrix
from geometry.retractions import RetractionKind

TINY_TRACE = {"family": "trace", "seed": 1, "params": {"n": 6, "k": 1}}


def _experiment(tmp_path, schemes, problem=TINY_TRACE, **extra):
    data = {
        "name": "tiny",
        "problem": problem,
        "schemes": {"list": schemes},
        "stopping": {"tol": 1e-8, "theta": 1e-3, "mxit": 500},
        "output": {"dir": str(tmp_path / "out")},
        **extra,
    }
    return ExperimentConfig.from_dict(data)


# ── Schemes and configs ───────────────────────────────────────────────────────

def test_scheme_parse():
    spec = SchemeSpec.parse("hRiN-Cay-c(0.5)")
    assert spec.method == "hRiN"
    assert spec.retraction is RetractionKind.CAYLEY
    assert spec.metric == "c(0.5)"
    assert spec.name == "hRiN-Cay-c(0.5)"


@pytest.mark.parametrize("bad", ["RGD-SR", "BFGS-SR-e", "RGD-QR-e", "RGD-SR-x", "RGD-SR-c(abc)"])
def test_scheme_parse_rejects(bad):
    with pytest.raises(ConfigError):
        SchemeSpec.parse(bad)


def test_scheme_product_and_list_are_deduplicated():
    exp = ExperimentConfig.from_dict(
        {
            "problem": TINY_TRACE,
            "schemes": {
                "methods": ["RGD", "hRN"],
                "retractions": ["SR"],
                "metrics": ["M", "e"],
                "list": ["RGD-SR-M", "RiN-Cay-c"],
            },
        }
    )
    assert [s.name for s in exp.schemes] == ["RGD-SR-M", "RGD-SR-e", "hRN-SR-M", "hRN-SR-e", "RiN-Cay-c"]
    assert exp.name == "trace"


@pytest.mark.parametrize(
    "data",
    [
        {"problem": TINY_TRACE, "extra": 1},
        {"schemes": {}},
        {"problem": {"family": "lasso"}},
        {"problem": {**TINY_TRACE, "size": 3}},
        {"problem": TINY_TRACE, "stopping": {"tol": 1e-2, "theta": 1e-3}},
        {"problem": TINY_TRACE, "stopping": {"tolerance": 1e-8}},
        {"problem": TINY_TRACE, "workers": 0},
        {"problem": TINY_TRACE, "newton": {"eta": 2.0}},
        {"problem": {"family": "matrix_market", "cost": "svd", "A": "a.mtx"}},
        [],
    ],
)
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data)


def test_config_dict_roundtrip(tmp_path):
    exp = _experiment(tmp_path, ["RGD-SR-M", "hRiN-Cay-e"])
    again = ExperimentConfig.from_dict(exp.to_dict())
    assert [s.name for s in again.schemes] == [s.name for s in exp.schemes]
    assert again.stopping == exp.stopping
    assert again.output.dir == exp.output.dir


def test_bad_generator_params():
    with pytest.raises(ConfigError):
        build_problem({"family": "trace", "params": {"size": 4}})


def test_matrix_market_problem_with_relative_paths(tmp_path):
    problem = build_problem({**TINY_TRACE, "params": {"n": 4, "k": 1}})
    write_matrix(tmp_path / "A.mtx", problem.cost.A)
    path = tmp_path / "exp.json"
    path.write_text(
        json.dumps(
            {
                "problem": {"family": "matrix_market", "cost": "trace", "A": "A.mtx", "k": 1, "seed": 3},
                "schemes": {"list": ["RGD-SR-M"]},
            }
        ),
        encoding="utf-8",
    )
    exp = ExperimentConfig.load(str(path))
    assert exp.name == "exp"
    assert os.path.isabs(exp.problem["A"])
    loaded = build_problem(exp.problem)
    assert np.allclose(loaded.cost.A, problem.cost.A)
    assert loaded.x0.feas <= 1e-8
    assert loaded.metadata["source"] == "A.mtx"


def test_load_rejects_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(str(path))


# ── Suite ─────────────────────────────────────────────────────────────────────

def test_empty_scheme_list_writes_header_only_csv(tmp_path):
    exp = _experiment(tmp_path, [])
    suite = run_suite(exp)
    assert suite.results == [] and suite.all_ok
    frame = pd.read_csv(tmp_path / "out" / "summary.csv")
    assert list(frame.columns) == SUMMARY_COLUMNS
    assert len(frame) == 0


def test_suite_writes_summary_and_histories(tmp_path):
    exp = _experiment(tmp_path, ["RGD-SR-M", "hRN-SR-e"])
    suite = run_suite(exp)
    assert suite.all_ok
    assert [r.status for r in suite.results] == ["converged", "converged"]

    out = tmp_path / "out"
    frame = pd.read_csv(out / "summary.csv")
    assert list(frame["scheme"]) == ["RGD-SR-M", "hRN-SR-e"]
    assert (frame["feas"] <= 1e-8).all()

    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["status_counts"] == {"converged": 2}
    assert summary["config"]["schemes"]["list"] == ["RGD-SR-M", "hRN-SR-e"]

    histories = load_histories(str(out / "history"))
    assert set(histories) == {"RGD-SR-M", "hRN-SR-e"}
    hybrid = histories["hRN-SR-e"]
    assert list(hybrid.columns) == HISTORY_COLUMNS
    assert hybrid["phase"].iloc[0] == "init"
    assert "Newton" in set(hybrid["phase"])
    assert plot_convergence(histories, str(tmp_path / "plots")).endswith("convergence.png")
    assert (tmp_path / "plots" / "convergence.png").exists()


def test_failed_scheme_becomes_error_row(tmp_path):
    quartic = {"family": "quartic", "seed": 0, "params": {"n": 2}}
    # quartic costs have no constant Hessian to weight the metric with
    exp = _experiment(tmp_path, ["RGD-SR-M"], problem=quartic)
    suite = run_suite(exp, write=False)
    (result,) = suite.results
    assert result.status == "error"
    assert "ConfigError" in result.message
    assert not suite.all_ok


def test_numerical_failure_becomes_error_row(tmp_path, monkeypatch):
    def exhausted(*args, **kwargs):
        raise MemoryError("saddle system")

    monkeypatch.setattr(suite_module, "run_method", exhausted)
    suite = run_suite(_experiment(tmp_path, ["hRN-SR-M", "RGD-SR-e"]), write=False)
    assert [r.status for r in suite.results] == ["error", "error"]
    assert all("MemoryError" in r.message for r in suite.results)


@pytest.mark.slow
def test_parallel_suite_matches_serial(tmp_path):
    schemes = ["RGD-SR-M", "RGD-Cay-M", "hRiN-SR-e"]
    serial = run_suite(_experiment(tmp_path / "a", schemes), write=False)
    parallel = run_suite(_experiment(tmp_path / "b", schemes, workers=2), write=False)
    assert [r.scheme for r in parallel.results] == schemes
    for a, b in zip(serial.results, parallel.results):
        assert a.status == b.status
        assert a.phase1_iters == b.phase1_iters and a.phase2_iters == b.phase2_iters
        assert a.f_star == pytest.approx(b.f_star, rel=1e-10)


# ── Reports ───────────────────────────────────────────────────────────────────

def test_fit_convergence_order():
    quadratic = [1e-1, 1e-2, 1e-4, 1e-8]
    linear = [0.5**j for j in range(1, 8)]
    assert fit_convergence_order(quadratic) == pytest.approx(2.0, rel=1e-6)
    assert fit_convergence_order(linear) == pytest.approx(1.0, rel=1e-6)
    assert fit_convergence_order([1e-1, 0.0, 1e-2, 1e-4]) == pytest.approx(2.0, rel=1e-6)
    with pytest.raises(ValueError):
        fit_convergence_order([1e-1, 1e-2])


def test_load_history_validates(tmp_path):
    bad = tmp_path / "bad.csv"
    pd.DataFrame({"j": [0, 1], "f": [1.0, 0.5]}).to_csv(bad, index=False)
    with pytest.raises(ValueError):
        load_history(str(bad))
    unordered = tmp_path / "unordered.csv"
    pd.DataFrame([{c: 0 for c in HISTORY_COLUMNS} | {"j": j} for j in (1, 0)]).to_csv(unordered, index=False)
    with pytest.raises(ValueError):
        load_history(str(unordered))


# ── CLI ───────────────────────────────────────────────────────────────────────

def test_gen_writes_loadable_configs(tmp_path):
    assert main.main(["gen", "--dir", str(tmp_path)]) == 0
    for name in main.EXAMPLE_CONFIGS:
        exp = ExperimentConfig.load(str(tmp_path / f"{name}.json"))
        assert exp.name == name
        assert exp.schemes


def test_sparse_least_squares_config_runs_inexact_newton_only():
    exp = ExperimentConfig.from_dict(main.EXAMPLE_CONFIGS["least_squares_sparse"], name="least_squares_sparse")
    assert {s.method for s in exp.schemes} == {"hRiN"}
    assert (exp.stopping.tol, exp.stopping.theta) == (1e-8, 1e-3)
    shipped = ExperimentConfig.load(os.path.join(os.path.dirname(__file__), "..", "configs", "least_squares_sparse.json"))
    assert [s.name for s in shipped.schemes] == [s.name for s in exp.schemes]


def test_run_exit_codes(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(
        json.dumps({"problem": TINY_TRACE, "schemes": {"list": ["RGD-SR-M"]}, "stopping": {"mxit": 500}}),
        encoding="utf-8",
    )
    assert main.main(["run", str(path), "--out", str(tmp_path / "res")]) == 0
    assert (tmp_path / "res" / "summary.csv").exists()
    assert main.main(["run", str(tmp_path / "missing.json")]) == 2
    path.write_text(json.dumps({"problem": TINY_TRACE, "bogus": 1}), encoding="utf-8")
    assert main.main(["run", str(path)]) == 2


def test_check_rejects_unknown_names():
    assert main.main(["check", "--only", "nonsense"]) == 2


@pytest.mark.slow
def test_acceptance_checks_pass(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    os.makedirs("results", exist_ok=True)
    assert main.main(["check"]) == 0
    assert (tmp_path / "results" / "acceptance.json").exists()
