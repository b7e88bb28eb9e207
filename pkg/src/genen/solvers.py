"""Lasso, Elastic Net and generalized Elastic Net fits by coordinate descent.

Every estimator here minimizes a criterion of the form

    ||y - X b||^2 + lam * ||b||_1 + eta * b' P b

with ``P = 0`` (Lasso), ``P = I`` (Elastic Net) or ``P = Sigma`` (gEN). The
quadratic part is written as an augmented least-squares problem: ``X`` is
stacked over ``sqrt(eta) * P^{1/2}`` and ``y`` over zeros, and cyclic
coordinate descent with soft-thresholding runs on that design's Gram matrix.

For gEN this is the whitened criterion

    ||y - X~ b~||^2 + lam * ||Sigma^{-1/2} b~||_1 + eta * ||b~||^2,
    X~ = X Sigma^{-1/2},

after the change of variables ``b = Sigma^{-1/2} b~``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

from genen._cd import cd_sweeps
from genen.linalg import mat_power_half, sym_matrix

log = logging.getLogger(__name__)

METHODS = ("lasso", "en", "gen")

MAX_SWEEPS = 100_000
UPDATE_TOL = 1e-8
KKT_TOL = 1e-6
_CHUNK = 100
_FULL_EVERY = 10


@dataclass(frozen=True)
class PenaltyConfig:
    lam: float
    eta: float = 0.0

    def __post_init__(self):
        for name in ("lam", "eta"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {v}")
            object.__setattr__(self, name, v)


@dataclass
class GenEnFit:
    method: str
    beta_hat: np.ndarray
    beta_tilde_hat: np.ndarray
    penalty: PenaltyConfig
    iterations: int
    converged: bool
    objective: float
    kkt_residual: float
    objective_trace: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "lambda": self.penalty.lam,
            "eta": self.penalty.eta,
            "beta_hat": [float(v) for v in self.beta_hat],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "objective": float(self.objective),
            "kkt_residual": float(self.kkt_residual),
        }


@dataclass
class KktReport:
    """Subgradient ``z`` recovered from the stationarity equation.

    ``active_gap`` is ``max |z_j - sign(b_j)|`` over non-zero coordinates and
    ``bound_gap`` is ``max(0, |z_j| - 1)`` over zero coordinates. When
    ``lam == 0`` both are computed on the raw gradient instead.
    """

    z: np.ndarray
    active_gap: float
    bound_gap: float

    @property
    def residual(self) -> float:
        return max(self.active_gap, self.bound_gap)


def kkt_tolerance(X, y) -> float:
    """Stationarity tolerance ``1e-6 * (1 + ||X'y||_inf)``."""
    return KKT_TOL * (1.0 + float(np.max(np.abs(np.asarray(X).T @ np.asarray(y)), initial=0.0)))


def _gaps(grad: np.ndarray, beta: np.ndarray, lam: float) -> KktReport:
    active = beta != 0
    if lam == 0:
        z = grad.copy()
        a = float(np.max(np.abs(grad[active]), initial=0.0))
        return KktReport(z, a, float(np.max(np.abs(grad), initial=0.0)))
    z = (2.0 / lam) * grad
    a = float(np.max(np.abs(z[active] - np.sign(beta[active])), initial=0.0))
    b = float(np.max(np.abs(z[~active]) - 1.0, initial=0.0))
    return KktReport(z, a, max(b, 0.0))


def _penalty_matrix(method: str, p: int, Sigma) -> Optional[np.ndarray]:
    if method == "lasso":
        return None
    if method == "en":
        return np.eye(p)
    if Sigma is None:
        raise ValueError("method 'gen' requires Sigma")
    return sym_matrix(Sigma)


def kkt_check(fit: GenEnFit, X, y, Sigma=None) -> KktReport:
    """Evaluate ``X'y - (X'X + eta P) b = (lam/2) z`` at the fitted ``b``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    beta = np.asarray(fit.beta_hat, dtype=np.float64)
    grad = X.T @ y - X.T @ (X @ beta)
    P = _penalty_matrix(fit.method, X.shape[1], Sigma)
    if P is not None and fit.penalty.eta:
        grad -= fit.penalty.eta * (P @ beta)
    return _gaps(grad, beta, fit.penalty.lam)


def objective(X, y, beta, penalty: PenaltyConfig, P=None) -> float:
    r = np.asarray(y) - np.asarray(X) @ beta
    val = float(r @ r) + penalty.lam * float(np.sum(np.abs(beta)))
    if P is not None and penalty.eta:
        val += penalty.eta * float(beta @ (P @ beta))
    return val


def augmented_design(X, y, root, eta):
    """Stack ``X`` over ``sqrt(eta) * root`` and ``y`` over a zero block."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if root is None or eta == 0:
        return X, y
    p = X.shape[1]
    return np.vstack([X, math.sqrt(eta) * root]), np.concatenate([y, np.zeros(p)])


def _polish(Q, c, h, beta, current):
    """Exact minimizer on the current support with signs held fixed.

    Returned only when it keeps every sign and does not raise the objective,
    which makes it a valid descent step for the full criterion.
    """
    S = np.flatnonzero(beta)
    if S.size == 0:
        return None
    s = np.sign(beta[S])
    try:
        x = np.linalg.solve(Q[np.ix_(S, S)], c[S] - h * s)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.sign(x) == s):
        return None
    cand = np.zeros_like(beta)
    cand[S] = x
    val = float(cand @ (Q @ cand) - 2.0 * c @ cand + 2.0 * h * np.abs(cand).sum())
    if val > current:
        return None
    return cand


def _minimize(Q, c, yy, lam, kkt_tol, beta0=None, max_sweeps=MAX_SWEEPS):
    """Coordinate descent on ``b'Qb - 2c'b + lam |b|_1``; returns
    ``(beta, sweeps, converged, report, trace)``."""
    p = c.shape[0]
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=np.float64)
    Q = np.ascontiguousarray(Q)
    h = 0.5 * lam
    g = c - Q @ beta
    buf = np.empty(_CHUNK)
    traces = []
    sweeps = 0
    converged = False
    report = _gaps(g, beta, lam)
    while sweeps < max_sweeps:
        k, small = cd_sweeps(Q, c, h, beta, g, yy, min(_CHUNK, max_sweeps - sweeps),
                             UPDATE_TOL, buf, _FULL_EVERY)
        traces.append(buf[:k].copy())
        sweeps += k
        g = c - Q @ beta
        report = _gaps(g, beta, lam)
        if small and report.residual <= kkt_tol:
            converged = True
            break
        cand = _polish(Q, c, h, beta, traces[-1][-1])
        if cand is not None:
            beta = cand
            g = c - Q @ beta
    if not converged:
        log.debug("coordinate descent stopped after %d sweeps, kkt residual %.3e",
                  sweeps, report.residual)
    return beta, sweeps, converged, report, np.concatenate(traces)


def _fit(method, X, y, penalty, root=None, P=None, inv_root=None, beta0=None,
         max_sweeps=MAX_SWEEPS) -> GenEnFit:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"inconsistent shapes: X {X.shape}, y {y.shape}")
    Xa, ya = augmented_design(X, y, root, penalty.eta)
    Q = Xa.T @ Xa
    Q = 0.5 * (Q + Q.T)
    c = Xa.T @ ya
    beta, sweeps, converged, report, trace = _minimize(
        Q, c, float(ya @ ya), penalty.lam, kkt_tolerance(X, y), beta0, max_sweeps)
    beta_tilde = root @ beta if method == "gen" else beta.copy()
    return GenEnFit(
        method=method,
        beta_hat=beta,
        beta_tilde_hat=beta_tilde,
        penalty=penalty,
        iterations=sweeps,
        converged=converged,
        objective=objective(X, y, beta, penalty, P),
        kkt_residual=report.residual,
        objective_trace=trace,
    )


def fit_lasso(X, y, lam: float, beta0=None, max_sweeps: int = MAX_SWEEPS) -> GenEnFit:
    """Minimize ``||y - X b||^2 + lam ||b||_1``.

    Non-convergence is not an error: the fit comes back with
    ``converged=False`` and the caller decides what to do with it.
    """
    return _fit("lasso", X, y, PenaltyConfig(lam, 0.0), beta0=beta0, max_sweeps=max_sweeps)


def fit_elastic_net(X, y, penalty: PenaltyConfig, beta0=None,
                    max_sweeps: int = MAX_SWEEPS) -> GenEnFit:
    """Minimize ``||y - X b||^2 + lam ||b||_1 + eta ||b||_2^2``."""
    p = np.asarray(X).shape[1]
    eye = np.eye(p)
    return _fit("en", X, y, penalty, root=eye, P=eye, beta0=beta0, max_sweeps=max_sweeps)


def fit_gen_elastic_net(X, y, Sigma, penalty: PenaltyConfig, beta0=None,
                        max_sweeps: int = MAX_SWEEPS, sigma_half=None) -> GenEnFit:
    """Generalized Elastic Net estimate in original coordinates.

    Parameters
    ----------
    X, y : design (n x p) and response (n,)
    Sigma : (p, p) positive definite row covariance of ``X``
    penalty : l1 weight ``lam`` and quadratic weight ``eta``
    sigma_half : optional precomputed ``Sigma^{1/2}``

    Returns
    -------
    GenEnFit
        ``beta_tilde_hat`` is the whitened-coordinate minimizer and
        ``beta_hat = Sigma^{-1/2} beta_tilde_hat``.
    """
    S = sym_matrix(Sigma)
    # fails early on a near-singular Sigma
    mat_power_half(S, -0.5)
    root = mat_power_half(S, 0.5) if sigma_half is None else np.asarray(sigma_half)
    return _fit("gen", X, y, penalty, root=root, P=S, beta0=beta0, max_sweeps=max_sweeps)


def _check_grid(name, grid) -> List[float]:
    vals = [float(v) for v in grid]
    if not vals:
        raise ValueError(f"{name} must be non-empty")
    if any(b < a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{name} must be sorted ascending")
    return vals


def solve_path(X, y, Sigma, lambda_grid: Iterable[float], eta_grid: Sequence[float] = (0.0,),
               method: str = "gen", max_sweeps: int = MAX_SWEEPS) -> List[GenEnFit]:
    """Fit every ``(lambda, eta)`` cell of a grid.

    Within one ``eta`` the fits are warm-started from the largest ``lambda``
    downwards. The result is ordered by ``eta`` then ``lambda``, both
    ascending. A cell that fails to converge is kept with ``converged=False``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    lams = _check_grid("lambda_grid", lambda_grid)
    etas = _check_grid("eta_grid", eta_grid)
    if method == "lasso" and any(e != 0 for e in etas):
        raise ValueError("lasso has no quadratic penalty; eta_grid must be (0,)")
    X = np.asarray(X, dtype=np.float64)
    p = X.shape[1]
    if method == "gen":
        P = sym_matrix(Sigma)
        mat_power_half(P, -0.5)
        root = mat_power_half(P, 0.5)
    elif method == "en":
        P = root = np.eye(p)
    else:
        P = root = None
    fits: List[GenEnFit] = []
    for eta in etas:
        row = [None] * len(lams)
        beta0 = None
        for i in reversed(range(len(lams))):
            fit = _fit(method, X, y, PenaltyConfig(lams[i], eta), root=root, P=P,
                       beta0=beta0, max_sweeps=max_sweeps)
            row[i] = fit
            beta0 = fit.beta_hat
        fits.extend(row)
    return fits
