"""Replicated simulation experiments comparing gEN with the Elastic Net.

Three protocols are available:

``criteria_box``
    IC, EIC and GIC per replication with box-plot summaries per cell.
``condition_curves``
    Replication averages of the eigenvalue quantities and of both sides of
    the ``eta`` feasibility inequality, as functions of ``eta``.
``tprfpr``
    Best ``TPR - FPR`` over a ``(lambda, eta)`` grid per replication, and the
    TPR / FPR at that cell, averaged per method.

Each replication draws from its own RNG stream keyed by ``(p, n, q, rep)``,
so results are identical whatever the worker count or execution order.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from genen.conditions import (
    DEFAULT_ETA_GRID,
    DEFAULT_LAMBDA_GRID,
    condition_report,
    eigen_quantities,
    eta_condition,
    partition_moments,
)
from genen.linalg import mat_power_half
from genen.metrics import MetricsRecord, best_tpr_minus_fpr, selection_metrics
from genen.simulate import CovarianceSpec, TruthSpec, build_covariance, sample_dataset
from genen.solvers import solve_path

log = logging.getLogger(__name__)

KINDS = ("criteria_box", "condition_curves", "tprfpr")

DEFAULT_REPS = {"criteria_box": 20, "condition_curves": 10, "tprfpr": 20}
TPRFPR_ETA_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)

SCHEMAS = {
    "criteria": ["p", "n", "q", "b", "rep", "seed", "ic", "eic", "gic",
                 "eic_lambda", "eic_eta", "gic_lambda", "gic_eta"],
    "criteria_summary": ["p", "n", "q", "b", "criterion", "min", "q1", "median", "q3", "max"],
    "curves": ["p", "n", "q", "eta", "lmax_HA", "lmax_C11inv", "lmax_HB",
               "eta_lhs", "eta_rhs"],
    "tprfpr": ["p", "n", "q", "b", "method", "rep", "best_lambda", "best_eta",
               "tpr", "fpr", "diff"],
    "tprfpr_summary": ["p", "n", "q", "b", "method", "reps", "mean_diff", "mean_tpr", "mean_fpr"],
    "failures": ["kind", "p", "n", "q", "b", "rep", "error"],
}

PRESETS = {
    "desk": {"p": [200], "n": [200], "q": [5], "b": [10.0]},
    "full-p200": {"p": [200], "n": [100, 200, 400], "q": [5], "b": [1.0, 10.0]},
    "full-p400": {"p": [400], "n": [100, 200, 400], "q": [5], "b": [1.0, 10.0]},
    "full-p600": {"p": [600], "n": [100, 200, 400], "q": [5], "b": [1.0, 10.0]},
}


@dataclass
class ExperimentPlan:
    kind: str = "tprfpr"
    p: List[int] = field(default_factory=lambda: [200])
    n: List[int] = field(default_factory=lambda: [200])
    q: List[int] = field(default_factory=lambda: [5])
    b: List[float] = field(default_factory=lambda: [10.0])
    sigma: float = 1.0
    alphas: List[float] = field(default_factory=lambda: [0.3, 0.5, 0.7])
    lambda_grid: Optional[List[float]] = None
    lambda_count: int = 30
    lambda_min_ratio: float = 1e-3
    eta_grid: Optional[List[float]] = None
    methods: List[str] = field(default_factory=lambda: ["en", "gen"])
    reps: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        for name in ("p", "n", "q", "b", "methods"):
            if not list(getattr(self, name)):
                raise ValueError(f"plan field {name!r} must be a non-empty list")
        self.p = [int(v) for v in self.p]
        self.n = [int(v) for v in self.n]
        self.q = [int(v) for v in self.q]
        self.b = [float(v) for v in self.b]
        self.alphas = [float(v) for v in self.alphas]
        if len(self.alphas) != 3:
            raise ValueError("alphas must hold three correlations")
        if self.reps is None:
            self.reps = DEFAULT_REPS[self.kind]
        if int(self.reps) < 1:
            raise ValueError("reps must be at least 1")
        self.reps = int(self.reps)
        if self.eta_grid is None:
            self.eta_grid = list(TPRFPR_ETA_GRID if self.kind == "tprfpr" else DEFAULT_ETA_GRID)
        if self.lambda_grid is None and self.kind == "criteria_box":
            self.lambda_grid = list(DEFAULT_LAMBDA_GRID)
        self.eta_grid = sorted(float(v) for v in self.eta_grid)
        if self.lambda_grid is not None:
            self.lambda_grid = sorted(float(v) for v in self.lambda_grid)

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        return asdict(self)

    def cells(self) -> List[Tuple[int, int, int]]:
        return [(p, n, q) for p in self.p for n in self.n for q in self.q]


def _covariance(plan: ExperimentPlan, p: int, q: int):
    spec = CovarianceSpec(p, q, *plan.alphas)
    Sigma = build_covariance(spec)
    return spec, Sigma, mat_power_half(Sigma, 0.5)


def _map(func, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def resolve_workers(workers: Optional[int] = None) -> int:
    if workers is None:
        env = os.environ.get("GEN_EN_WORKERS")
        workers = int(env) if env else 1
    return max(1, int(workers))


# criteria_box

def _criteria_rep(task):
    plan, p, n, q, rep = task
    spec, Sigma, root = _covariance(plan, p, q)
    rows, failures = [], []
    for b in plan.b:
        try:
            d = sample_dataset(spec, TruthSpec(q, b), n, plan.sigma, plan.seed,
                               stream=(p, n, q, rep), sigma_half=root)
            rpt = condition_report(d.X, Sigma, d.beta_star, plan.lambda_grid, plan.eta_grid)
            rows.append({"p": p, "n": n, "q": q, "b": b, "rep": rep, "seed": plan.seed,
                         "ic": rpt.ic_value, "eic": rpt.eic_value, "gic": rpt.gic_value,
                         "eic_lambda": rpt.eic_lambda, "eic_eta": rpt.eic_eta,
                         "gic_lambda": rpt.gic_lambda, "gic_eta": rpt.gic_eta})
        except (ArithmeticError, ValueError) as exc:
            failures.append(_failure(plan, p, n, q, b, rep, exc))
    return rows, failures


def _failure(plan, p, n, q, b, rep, exc):
    log.warning("replication %d of cell p=%d n=%d q=%d b=%s failed: %s", rep, p, n, q, b, exc)
    return {"kind": plan.kind, "p": p, "n": n, "q": q, "b": b, "rep": rep,
            "error": f"{type(exc).__name__}: {exc}"}


def box_stats(values: Sequence[float]) -> Dict[str, float]:
    v = np.asarray([x for x in values if x is not None and not math.isnan(x)], dtype=float)
    if v.size == 0:
        return {k: math.nan for k in ("min", "q1", "median", "q3", "max")}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"min": float(v.min()), "q1": float(q1), "median": float(med),
            "q3": float(q3), "max": float(v.max())}


def run_criteria_experiment(plan: ExperimentPlan, workers: int = 1) -> Dict[str, List[dict]]:
    if plan.kind != "criteria_box":
        raise ValueError("plan.kind must be 'criteria_box'")
    tasks = [(plan, p, n, q, r) for (p, n, q) in plan.cells() for r in range(plan.reps)]
    rows, failures = _collect(_map(_criteria_rep, tasks, workers))
    summary = []
    for (p, n, q) in plan.cells():
        for b in plan.b:
            sel = [r for r in rows if (r["p"], r["n"], r["q"], r["b"]) == (p, n, q, b)]
            for crit in ("ic", "eic", "gic"):
                summary.append({"p": p, "n": n, "q": q, "b": b, "criterion": crit,
                                **box_stats([r[crit] for r in sel])})
    return {"criteria": _sorted(rows, ("p", "n", "q", "b", "rep")),
            "criteria_summary": summary, "failures": failures}


def _collect(results):
    rows, failures = [], []
    for r, f in results:
        rows.extend(r)
        failures.extend(f)
    return rows, failures


def _sorted(rows, keys):
    return sorted(rows, key=lambda r: tuple(r[k] for k in keys))


# condition_curves

def _curves_rep(task):
    plan, p, n, q, rep = task
    spec, Sigma, root = _covariance(plan, p, q)
    b = plan.b[0]
    rows, failures = [], []
    try:
        d = sample_dataset(spec, TruthSpec(q, b), n, plan.sigma, plan.seed,
                           stream=(p, n, q, rep), sigma_half=root)
        base = partition_moments(d.X, Sigma, q)
        b1 = d.beta_star[:q]
        for eta in plan.eta_grid:
            pm = base.with_eta(eta)
            eq = eigen_quantities(d.X, pm)
            ineq = eta_condition(eta, eq.lmax_C11inv, n, pm.S11, b1)
            rows.append({"p": p, "n": n, "q": q, "eta": eta, "rep": rep,
                         "lmax_HA": eq.lmax_HA, "lmax_C11inv": eq.lmax_C11inv,
                         "lmax_HB": eq.lmax_HB, "eta_lhs": ineq.lhs, "eta_rhs": ineq.rhs})
    except (ArithmeticError, ValueError) as exc:
        failures.append(_failure(plan, p, n, q, b, rep, exc))
    return rows, failures


def run_condition_curves(plan: ExperimentPlan, workers: int = 1) -> Dict[str, List[dict]]:
    if plan.kind != "condition_curves":
        raise ValueError("plan.kind must be 'condition_curves'")
    tasks = [(plan, p, n, q, r) for (p, n, q) in plan.cells() for r in range(plan.reps)]
    rows, failures = _collect(_map(_curves_rep, tasks, workers))
    curves = []
    value_keys = ("lmax_HA", "lmax_C11inv", "lmax_HB", "eta_lhs", "eta_rhs")
    for (p, n, q) in plan.cells():
        for eta in plan.eta_grid:
            sel = sorted((r for r in rows if (r["p"], r["n"], r["q"], r["eta"]) == (p, n, q, eta)),
                         key=lambda r: r["rep"])
            if not sel:
                continue
            row = {"p": p, "n": n, "q": q, "eta": eta}
            for k in value_keys:
                row[k] = float(np.mean([r[k] for r in sel]))
            curves.append(row)
    return {"curves": curves, "failures": failures}


def feasible_etas(curves: List[dict], p: int, n: int, q: int) -> List[float]:
    """Grid values of ``eta`` where the averaged ``eta`` inequality holds."""
    return [r["eta"] for r in curves
            if (r["p"], r["n"], r["q"]) == (p, n, q) and r["eta_lhs"] < r["eta_rhs"]]


# tprfpr

def lambda_grid_for(X, y, count: int, min_ratio: float) -> np.ndarray:
    """``count`` log-spaced values on ``[min_ratio * lmax, lmax]`` with
    ``lmax = 2 ||X'y||_inf``, the smallest l1 weight giving an all-zero fit."""
    lmax = 2.0 * float(np.max(np.abs(X.T @ y)))
    if lmax == 0:
        return np.array([1.0])
    return np.logspace(math.log10(lmax * min_ratio), math.log10(lmax), count)


def _tprfpr_rep(task):
    plan, p, n, q, rep = task
    spec, Sigma, root = _covariance(plan, p, q)
    rows, failures = [], []
    for b in plan.b:
        try:
            d = sample_dataset(spec, TruthSpec(q, b), n, plan.sigma, plan.seed,
                               stream=(p, n, q, rep), sigma_half=root)
            lams = (plan.lambda_grid if plan.lambda_grid is not None
                    else lambda_grid_for(d.X, d.y, plan.lambda_count, plan.lambda_min_ratio))
            for method in plan.methods:
                etas = [0.0] if method == "lasso" else plan.eta_grid
                fits = solve_path(d.X, d.y, Sigma, lams, etas, method)
                unconverged = sum(not f.converged for f in fits)
                if unconverged:
                    log.warning("%d of %d %s fits did not converge (p=%d n=%d rep=%d)",
                                unconverged, len(fits), method, p, n, rep)
                recs = [MetricsRecord(method, f.penalty.lam, f.penalty.eta, rep=rep,
                                      seed=plan.seed,
                                      **selection_metrics(f.beta_hat, d.beta_star, q))
                        for f in fits]
                best = best_tpr_minus_fpr(recs)
                rows.append({"p": p, "n": n, "q": q, "b": b, "method": method, "rep": rep,
                             "best_lambda": best.lam, "best_eta": best.eta,
                             "tpr": best.tpr, "fpr": best.fpr, "diff": best.diff})
        except (ArithmeticError, ValueError) as exc:
            failures.append(_failure(plan, p, n, q, b, rep, exc))
    return rows, failures


def run_tprfpr_experiment(plan: ExperimentPlan, workers: int = 1) -> Dict[str, List[dict]]:
    if plan.kind != "tprfpr":
        raise ValueError("plan.kind must be 'tprfpr'")
    tasks = [(plan, p, n, q, r) for (p, n, q) in plan.cells() for r in range(plan.reps)]
    rows, failures = _collect(_map(_tprfpr_rep, tasks, workers))
    order = {m: i for i, m in enumerate(plan.methods)}
    rows.sort(key=lambda r: (r["p"], r["n"], r["q"], r["b"], order[r["method"]], r["rep"]))
    summary = []
    for (p, n, q) in plan.cells():
        for b in plan.b:
            for method in plan.methods:
                sel = [r for r in rows if (r["p"], r["n"], r["q"], r["b"], r["method"])
                       == (p, n, q, b, method)]
                if not sel:
                    continue
                summary.append({
                    "p": p, "n": n, "q": q, "b": b, "method": method, "reps": len(sel),
                    "mean_diff": float(np.mean([r["diff"] for r in sel])),
                    "mean_tpr": float(np.mean([r["tpr"] for r in sel])),
                    "mean_fpr": float(np.mean([r["fpr"] for r in sel])),
                })
    return {"tprfpr": rows, "tprfpr_summary": summary, "failures": failures}


RUNNERS = {
    "criteria_box": run_criteria_experiment,
    "condition_curves": run_condition_curves,
    "tprfpr": run_tprfpr_experiment,
}


def run_experiment(plan: ExperimentPlan, workers: int = 1) -> Dict[str, List[dict]]:
    return RUNNERS[plan.kind](plan, workers)
