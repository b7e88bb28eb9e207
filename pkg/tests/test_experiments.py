import math

import numpy as np
import pytest

from genen.conditions import condition_report
from genen.experiments import (
    PRESETS,
    SCHEMAS,
    ExperimentPlan,
    box_stats,
    feasible_etas,
    lambda_grid_for,
    resolve_workers,
    run_experiment,
)
from genen.metrics import MetricsRecord, best_tpr_minus_fpr, selection_metrics
from genen.simulate import CovarianceSpec, TruthSpec, build_covariance, sample_dataset
from genen.solvers import solve_path

SMALL = dict(p=[12], n=[30], q=[3], b=[3.0], reps=2, seed=5)


def test_plan_defaults_depend_on_kind():
    assert ExperimentPlan("criteria_box").reps == 20
    assert ExperimentPlan("condition_curves").reps == 10
    plan = ExperimentPlan("tprfpr")
    assert plan.reps == 20 and plan.eta_grid == [0.01, 0.1, 1.0, 10.0, 100.0]
    assert plan.lambda_grid is None
    assert len(ExperimentPlan("criteria_box").lambda_grid) == 20


def test_plan_validation():
    with pytest.raises(ValueError):
        ExperimentPlan("boxplot")
    with pytest.raises(ValueError):
        ExperimentPlan("tprfpr", p=[])
    with pytest.raises(ValueError):
        ExperimentPlan("tprfpr", reps=0)
    with pytest.raises(ValueError):
        ExperimentPlan("tprfpr", alphas=[0.1, 0.2])


def test_presets_cover_full_grid():
    assert PRESETS["desk"] == {"p": [200], "n": [200], "q": [5], "b": [10.0]}
    for p in (200, 400, 600):
        assert PRESETS[f"full-p{p}"]["b"] == [1.0, 10.0]


def test_box_stats():
    s = box_stats([1.0, 2.0, 3.0, 4.0, 5.0])
    assert (s["min"], s["q1"], s["median"], s["q3"], s["max"]) == (1.0, 2.0, 3.0, 4.0, 5.0)
    assert math.isnan(box_stats([])["median"])


def test_worker_resolution(monkeypatch):
    monkeypatch.setenv("GEN_EN_WORKERS", "3")
    assert resolve_workers() == 3
    assert resolve_workers(0) == 1
    monkeypatch.delenv("GEN_EN_WORKERS")
    assert resolve_workers() == 1


def test_criteria_rows_compose_direct_calls():
    plan = ExperimentPlan("criteria_box", lambda_grid=[1.0, 100.0], eta_grid=[0.1, 10.0], **SMALL)
    out = run_experiment(plan)
    assert [r["rep"] for r in out["criteria"]] == [0, 1]
    spec = CovarianceSpec(12, 3)
    d = sample_dataset(spec, TruthSpec(3, 3.0), 30, 1.0, 5, stream=(12, 30, 3, 1))
    rpt = condition_report(d.X, build_covariance(spec), d.beta_star, [1.0, 100.0], [0.1, 10.0])
    row = out["criteria"][1]
    assert row["ic"] == rpt.ic_value and row["gic"] == rpt.gic_value
    assert [r["criterion"] for r in out["criteria_summary"]] == ["ic", "eic", "gic"]
    assert set(out["criteria"][0]) == set(SCHEMAS["criteria"])
    assert out["failures"] == []


def test_tprfpr_rows_compose_direct_calls():
    plan = ExperimentPlan("tprfpr", lambda_count=8, eta_grid=[0.1, 1.0], **SMALL)
    out = run_experiment(plan)
    assert [(r["method"], r["rep"]) for r in out["tprfpr"]] == [
        ("en", 0), ("en", 1), ("gen", 0), ("gen", 1)]
    spec = CovarianceSpec(12, 3)
    S = build_covariance(spec)
    d = sample_dataset(spec, TruthSpec(3, 3.0), 30, 1.0, 5, stream=(12, 30, 3, 0))
    fits = solve_path(d.X, d.y, S, lambda_grid_for(d.X, d.y, 8, 1e-3), [0.1, 1.0], "gen")
    best = best_tpr_minus_fpr(
        MetricsRecord("gen", f.penalty.lam, f.penalty.eta,
                      **selection_metrics(f.beta_hat, d.beta_star, 3)) for f in fits)
    row = out["tprfpr"][2]
    assert (row["best_lambda"], row["best_eta"], row["diff"]) == (best.lam, best.eta, best.diff)
    assert len(out["tprfpr_summary"]) == 2


def test_degenerate_lambda_selects_nothing():
    plan = ExperimentPlan("tprfpr", lambda_grid=[1e12], eta_grid=[1.0], **SMALL)
    for row in run_experiment(plan)["tprfpr"]:
        assert row["tpr"] == 0.0 and row["fpr"] == 0.0


def test_lambda_grid_top_is_null_fit_threshold():
    rng = np.random.default_rng(0)
    X, y = rng.standard_normal((10, 4)), rng.standard_normal(10)
    grid = lambda_grid_for(X, y, 5, 1e-2)
    assert grid[-1] == pytest.approx(2 * np.max(np.abs(X.T @ y)))
    assert grid[0] == pytest.approx(grid[-1] * 1e-2)
    assert np.all(np.diff(grid) > 0)


def test_curves_and_feasible_range():
    plan = ExperimentPlan("condition_curves", eta_grid=[0.01, 1.0, 1e4], **SMALL)
    out = run_experiment(plan)
    assert len(out["curves"]) == 3
    feas = feasible_etas(out["curves"], 12, 30, 3)
    assert 0.01 in feas and 1e4 not in feas


def test_failures_recorded_not_raised():
    # q == p leaves no inactive block, so every replication fails cleanly
    plan = ExperimentPlan("criteria_box", p=[3], n=[10], q=[3], b=[1.0], reps=2,
                          lambda_grid=[1.0], eta_grid=[1.0])
    out = run_experiment(plan)
    assert out["criteria"] == [] and len(out["failures"]) == 2
    assert set(out["failures"][0]) == set(SCHEMAS["failures"])


def test_serial_and_parallel_agree():
    plan = ExperimentPlan("tprfpr", lambda_count=6, eta_grid=[1.0], **SMALL)
    assert run_experiment(plan, workers=1) == run_experiment(plan, workers=2)
