"""Command-line entry point: ``genen {simulate,fit,conditions,experiment}``.

Every subcommand accepts ``--config FILE`` (a JSON object of settings, or a
manifest written by a previous run) and flags; flags win over file values.
Each run writes ``manifest.json`` echoing the fully resolved settings, so
``genen <cmd> --config out/manifest.json`` repeats it.

Failures print a single JSON line on stderr and exit with:

    1 runtime failure, 2 usage error, 3 bad config, 4 output not writable,
    5 unreadable or malformed input data.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from genen import __version__
from genen import io
from genen.conditions import (
    DEFAULT_ETA_GRID,
    DEFAULT_LAMBDA_GRID,
    condition_report,
    lemma_events,
    theorem_quantities,
)
from genen.experiments import PRESETS, SCHEMAS, ExperimentPlan, resolve_workers, run_experiment
from genen.simulate import CovarianceSpec, Dataset, TruthSpec, build_covariance, sample_dataset
from genen.solvers import (
    METHODS,
    PenaltyConfig,
    fit_elastic_net,
    fit_gen_elastic_net,
    fit_lasso,
)

log = logging.getLogger("genen")

EXIT_RUNTIME, EXIT_USAGE, EXIT_CONFIG, EXIT_OUTPUT, EXIT_DATA = 1, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, **extra):
        super().__init__(message)
        self.code = code
        self.kind = kind
        self.extra = extra


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, "usage", message)


# Settings each subcommand understands; keys in config files are checked against these.
KEYS = {
    "simulate": {"p", "q", "n", "b", "sigma", "alphas", "seed", "rep", "out"},
    "fit": {"method", "lambda", "eta", "data", "sigma_file", "out"},
    "conditions": {"data", "sigma_file", "lambda", "eta", "sigma", "lambda_grid", "eta_grid",
                   "out"},
    "experiment": set(ExperimentPlan.field_names()) | {"preset", "workers", "out"},
}

DEFAULTS = {
    "simulate": {"p": 200, "q": 5, "n": 200, "b": 10.0, "sigma": 1.0,
                 "alphas": [0.3, 0.5, 0.7], "seed": 0, "rep": 0, "out": "."},
    "fit": {"method": "gen", "lambda": None, "eta": 0.0, "data": None, "sigma_file": None,
            "out": "."},
    "conditions": {"data": None, "sigma_file": None, "lambda": None, "eta": None,
                   "sigma": 1.0, "lambda_grid": list(DEFAULT_LAMBDA_GRID),
                   "eta_grid": list(DEFAULT_ETA_GRID), "out": "."},
    "experiment": {"preset": None, "workers": None, "out": "."},
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="genen", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"genen {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON settings file or a previous run's manifest.json")
        sp.add_argument("--out", help="output directory (created if missing; default: .)")

    sp = sub.add_parser("simulate", help="draw one dataset from the block-correlated model")
    common(sp)
    sp.add_argument("--p", type=int, help="number of predictors (default 200)")
    sp.add_argument("--q", type=int, help="number of active predictors (default 5)")
    sp.add_argument("--n", type=int, help="sample size (default 200)")
    sp.add_argument("--b", type=float, help="value of every non-zero coefficient (default 10)")
    sp.add_argument("--sigma", type=float, help="noise standard deviation (default 1)")
    sp.add_argument("--alphas", type=float, nargs=3, metavar=("A1", "A2", "A3"),
                    help="active/active, active/inactive, inactive/inactive correlations "
                         "(default 0.3 0.5 0.7)")
    sp.add_argument("--seed", type=int, help="base RNG seed (default 0)")
    sp.add_argument("--rep", type=int, help="replication index selecting the RNG stream (default 0)")

    sp = sub.add_parser("fit", help="fit lasso / en / gen at one (lambda, eta)")
    common(sp)
    sp.add_argument("--method", choices=METHODS, help="estimator (default gen)")
    sp.add_argument("--lambda", dest="lambda_", type=float, help="l1 weight (required)")
    sp.add_argument("--eta", type=float, help="quadratic weight (default 0)")
    sp.add_argument("--data", help="dataset CSV with columns x1..xp, y[, beta]")
    sp.add_argument("--sigma-file", dest="sigma_file",
                    help="headerless p x p covariance CSV (required for gen)")

    sp = sub.add_parser("conditions", help="IC / EIC / GIC and finite-sample diagnostics")
    common(sp)
    sp.add_argument("--data", help="dataset CSV with columns x1..xp, y, beta")
    sp.add_argument("--sigma-file", dest="sigma_file", help="headerless p x p covariance CSV")
    sp.add_argument("--lambda", dest="lambda_", type=float,
                    help="l1 weight for theorem quantities and noise events (optional)")
    sp.add_argument("--eta", type=float, help="quadratic weight paired with --lambda")
    sp.add_argument("--sigma", type=float, help="noise standard deviation (default 1)")
    sp.add_argument("--lambda-grid", dest="lambda_grid", type=float, nargs="+",
                    help="lambda values for the EIC/GIC minimization (default 20 log points "
                         "on [1e-2, 1e4])")
    sp.add_argument("--eta-grid", dest="eta_grid", type=float, nargs="+",
                    help="eta values for the EIC/GIC minimization (default 20 log points "
                         "on [1e-2, 1e4])")

    sp = sub.add_parser("experiment", help="run a replicated simulation protocol")
    common(sp)
    sp.add_argument("--kind", choices=("criteria_box", "condition_curves", "tprfpr"),
                    help="protocol to run (default tprfpr)")
    sp.add_argument("--preset", choices=sorted(PRESETS),
                    help="named (p, n, q, b) design; explicit settings override it")
    sp.add_argument("--p", type=int, nargs="+", help="predictor counts")
    sp.add_argument("--n", type=int, nargs="+", help="sample sizes")
    sp.add_argument("--q", type=int, nargs="+", help="active-set sizes")
    sp.add_argument("--b", type=float, nargs="+", help="coefficient magnitudes")
    sp.add_argument("--sigma", type=float, help="noise standard deviation (default 1)")
    sp.add_argument("--alphas", type=float, nargs=3, metavar=("A1", "A2", "A3"),
                    help="block correlations (default 0.3 0.5 0.7)")
    sp.add_argument("--reps", type=int,
                    help="replications per cell (default 20, or 10 for condition_curves)")
    sp.add_argument("--seed", type=int, help="base RNG seed, the only entropy source (default 0)")
    sp.add_argument("--workers", type=int,
                    help="worker processes (default: $GEN_EN_WORKERS or 1); "
                         "does not change results")
    sp.add_argument("--methods", nargs="+", choices=METHODS,
                    help="estimators compared by tprfpr (default en gen)")
    sp.add_argument("--lambda-grid", dest="lambda_grid", type=float, nargs="+",
                    help="absolute lambda grid (tprfpr default: relative grid below)")
    sp.add_argument("--lambda-count", dest="lambda_count", type=int,
                    help="tprfpr: number of log-spaced lambdas (default 30)")
    sp.add_argument("--lambda-min-ratio", dest="lambda_min_ratio", type=float,
                    help="tprfpr: smallest lambda as a fraction of 2||X'y||_inf (default 1e-3)")
    sp.add_argument("--eta-grid", dest="eta_grid", type=float, nargs="+",
                    help="eta grid (tprfpr default 0.01 0.1 1 10 100; others 20 log points "
                         "on [1e-2, 1e4])")
    return parser


def _load_config(path, command: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CliError(EXIT_CONFIG, "config", f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_CONFIG, "config", f"config {path} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise CliError(EXIT_CONFIG, "config", f"config {path} must hold a JSON object")
    if "config" in raw and "subcommand" in raw:
        if raw["subcommand"] != command:
            raise CliError(EXIT_CONFIG, "config",
                           f"manifest is for '{raw['subcommand']}', not '{command}'",
                           key="subcommand")
        raw = raw["config"]
    for key in raw:
        if key not in KEYS[command]:
            raise CliError(EXIT_CONFIG, "config", f"unknown config key '{key}' for {command}",
                           key=key)
    return raw


def resolve(args) -> dict:
    cmd = args.command
    settings = dict(DEFAULTS[cmd])
    if args.config:
        settings.update(_load_config(args.config, cmd))
    flags = {k.rstrip("_"): v for k, v in vars(args).items()
             if k not in ("command", "config", "verbose") and v is not None}
    settings.update(flags)
    return settings


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".genen-write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CliError(EXIT_OUTPUT, "output", f"output directory {out} is not writable: {exc}")
    return out


def _manifest(out: Path, command: str, config: dict, files) -> None:
    io.write_json(out / "manifest.json", {
        "tool": "genen",
        "version": __version__,
        "subcommand": command,
        "config": config,
        "outputs": sorted(files),
    })


def _read_data(path):
    if not path:
        raise CliError(EXIT_CONFIG, "config", "missing required setting 'data'", key="data")
    try:
        return io.read_dataset(path)
    except (OSError, ValueError, StopIteration) as exc:
        raise CliError(EXIT_DATA, "data", f"cannot read dataset {path}: {exc}")


def _read_sigma(path, p: int):
    try:
        S = io.read_matrix(path)
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_DATA, "data", f"cannot read covariance {path}: {exc}")
    if S.shape != (p, p):
        raise CliError(EXIT_DATA, "data", f"covariance in {path} has shape {S.shape}, "
                                          f"expected ({p}, {p})")
    return S


def cmd_simulate(cfg: dict) -> None:
    out = _out_dir(cfg["out"])
    try:
        spec = CovarianceSpec(int(cfg["p"]), int(cfg["q"]), *map(float, cfg["alphas"]))
        truth = TruthSpec(int(cfg["q"]), float(cfg["b"]))
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, "config", str(exc))
    Sigma = build_covariance(spec)
    d = sample_dataset(spec, truth, int(cfg["n"]), float(cfg["sigma"]), int(cfg["seed"]),
                       stream=(int(cfg["rep"]),))
    io.write_dataset(out / "data.csv", d, spec, truth)
    io.write_matrix(out / "sigma.csv", Sigma)
    _manifest(out, "simulate", cfg, ["data.csv", "data.csv.json", "sigma.csv"])


def cmd_fit(cfg: dict) -> None:
    if cfg["lambda"] is None:
        raise CliError(EXIT_CONFIG, "config", "missing required setting 'lambda'", key="lambda")
    method = cfg["method"]
    if method not in METHODS:
        raise CliError(EXIT_CONFIG, "config", f"unknown method '{method}'", key="method")
    X, y, _ = _read_data(cfg["data"])
    out = _out_dir(cfg["out"])
    try:
        penalty = PenaltyConfig(float(cfg["lambda"]), float(cfg["eta"] or 0.0))
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, "config", str(exc))
    if method == "lasso":
        if penalty.eta:
            raise CliError(EXIT_CONFIG, "config", "lasso takes no eta", key="eta")
        fit = fit_lasso(X, y, penalty.lam)
    elif method == "en":
        fit = fit_elastic_net(X, y, penalty)
    else:
        if not cfg["sigma_file"]:
            raise CliError(EXIT_CONFIG, "config", "method gen needs 'sigma_file'",
                           key="sigma_file")
        fit = fit_gen_elastic_net(X, y, _read_sigma(cfg["sigma_file"], X.shape[1]), penalty)
    io.write_json(out / "fit.json", fit.to_dict())
    _manifest(out, "fit", cfg, ["fit.json"])


def cmd_conditions(cfg: dict) -> None:
    X, y, beta = _read_data(cfg["data"])
    if beta is None:
        raise CliError(EXIT_DATA, "data", "conditions need the 'beta' column in the dataset")
    if not cfg["sigma_file"]:
        raise CliError(EXIT_CONFIG, "config", "missing required setting 'sigma_file'",
                       key="sigma_file")
    Sigma = _read_sigma(cfg["sigma_file"], X.shape[1])
    out = _out_dir(cfg["out"])
    result = {"conditions": condition_report(X, Sigma, beta, cfg["lambda_grid"],
                                             cfg["eta_grid"]).to_dict()}
    if cfg["lambda"] is not None:
        penalty = PenaltyConfig(float(cfg["lambda"]), float(cfg["eta"] or 0.0))
        result["theorem"] = theorem_quantities(X, Sigma, beta, penalty,
                                               float(cfg["sigma"])).to_dict()
        eps = y - X @ beta
        d = Dataset(X, y, beta, eps, float(cfg["sigma"]), 0)
        result["lemma_events"] = lemma_events(d, Sigma, penalty).to_dict()
    io.write_json(out / "conditions.json", result)
    _manifest(out, "conditions", cfg, ["conditions.json"])


def experiment_plan(cfg: dict) -> ExperimentPlan:
    fields = dict(PRESETS[cfg["preset"]]) if cfg.get("preset") else {}
    fields.update({k: v for k, v in cfg.items() if k in ExperimentPlan.field_names()})
    try:
        return ExperimentPlan(**fields)
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, "config", f"invalid experiment plan: {exc}")


def cmd_experiment(cfg: dict) -> None:
    if cfg.get("preset") and cfg["preset"] not in PRESETS:
        raise CliError(EXIT_CONFIG, "config", f"unknown preset '{cfg['preset']}'", key="preset")
    plan = experiment_plan(cfg)
    workers = resolve_workers(cfg.get("workers"))
    out = _out_dir(cfg["out"])
    tables = run_experiment(plan, workers)
    written = []
    for name, rows in tables.items():
        if name == "failures" and not rows:
            continue
        io.write_table(out / f"{name}.csv", SCHEMAS[name], rows)
        written.append(f"{name}.csv")
    resolved = {"preset": cfg.get("preset"), "workers": workers, "out": str(cfg["out"]),
                **plan.to_dict()}
    _manifest(out, "experiment", resolved, written)


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "conditions": cmd_conditions,
    "experiment": cmd_experiment,
}


def _report(err: CliError) -> int:
    payload = {"error": err.kind, "code": err.code, "message": str(err), **err.extra}
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return err.code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as err:
        return _report(err)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](resolve(args))
    except CliError as err:
        return _report(err)
    except (ArithmeticError, ValueError) as exc:
        return _report(CliError(EXIT_RUNTIME, "runtime", f"{type(exc).__name__}: {exc}"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
