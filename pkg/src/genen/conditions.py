"""Irrepresentable-type criteria (IC, EIC, GIC) and finite-sample diagnostics.

Notation follows the usual block split of the empirical covariance
``C = X'X / n`` into active (first ``q`` columns) and inactive parts:

    C11 = X1'X1/n,  C21 = X2'X1/n,  ...

and the ``Sigma``-shifted blocks used by the generalized Elastic Net,

    K11 = C11 + (eta/n) Sigma11,   K21 = C21 + (eta/n) Sigma21.

All criteria are computed per realization of ``X``. Probabilities are never
estimated here; replication frequencies are left to the experiment layer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from genen.linalg import NearSingularError, eigen_sym, lambda_max, solve_sym, sym_matrix
from genen.solvers import PenaltyConfig

DEFAULT_LAMBDA_GRID = tuple(np.logspace(-2, 4, 20))
DEFAULT_ETA_GRID = tuple(np.logspace(-2, 4, 20))

_SQRT_2_PLUS_SQRT_2 = math.sqrt(2.0 + math.sqrt(2.0))


@dataclass
class PartitionedMoments:
    C11: np.ndarray
    C12: np.ndarray
    C21: np.ndarray
    C22: np.ndarray
    S11: np.ndarray
    S12: np.ndarray
    S21: np.ndarray
    S22: np.ndarray
    K11: np.ndarray
    K21: np.ndarray
    n: int
    q: int
    p: int
    eta: float = 0.0

    def with_eta(self, eta: float) -> "PartitionedMoments":
        """Same moments with the shifted blocks recomputed for another ``eta``."""
        s = float(eta) / self.n
        return PartitionedMoments(
            self.C11, self.C12, self.C21, self.C22,
            self.S11, self.S12, self.S21, self.S22,
            self.C11 + s * self.S11, self.C21 + s * self.S21,
            self.n, self.q, self.p, float(eta),
        )


def partition_moments(X, Sigma, q: int, eta: float = 0.0) -> PartitionedMoments:
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if not 1 <= q < p:
        raise ValueError(f"need 1 <= q < p, got q={q}, p={p}")
    S = sym_matrix(Sigma)
    if S.shape != (p, p):
        raise ValueError(f"Sigma has shape {S.shape}, design has {p} columns")
    C = X.T @ X / n
    C = 0.5 * (C + C.T)
    C11, C12 = C[:q, :q], C[:q, q:]
    C21, C22 = C12.T.copy(), C[q:, q:]
    S11, S12, S21, S22 = S[:q, :q], S[:q, q:], S[q:, :q], S[q:, q:]
    s = float(eta) / n
    return PartitionedMoments(C11, C12, C21, C22, S11, S12, S21, S22,
                              C11 + s * S11, C21 + s * S21, n, q, p, float(eta))


def ic_value(pm: PartitionedMoments, sign_beta1) -> float:
    """``max_j |(C21 C11^{-1} sign(beta1*))_j|``; ``inf`` when ``C11`` is singular."""
    s = np.asarray(sign_beta1, dtype=np.float64)
    try:
        x = solve_sym(pm.C11, s)
    except NearSingularError:
        return math.inf
    return float(np.max(np.abs(pm.C21 @ x)))


class GridMin(NamedTuple):
    value: float
    lam: float
    eta: float
    cells: np.ndarray  # shape (len(eta_grid), len(lambda_grid))


def _argmin(cells: np.ndarray, lams, etas) -> GridMin:
    if not np.any(np.isfinite(cells)):
        return GridMin(math.inf, math.nan, math.nan, cells)
    i, j = np.unravel_index(np.argmin(np.where(np.isfinite(cells), cells, np.inf)), cells.shape)
    return GridMin(float(cells[i, j]), float(lams[j]), float(etas[i]), cells)


def _grids(lambda_grid, eta_grid):
    lams = np.asarray(lambda_grid, dtype=np.float64)
    etas = np.asarray(eta_grid, dtype=np.float64)
    if lams.size == 0 or etas.size == 0:
        raise ValueError("lambda and eta grids must be non-empty")
    if np.any(lams <= 0) or np.any(etas < 0):
        raise ValueError("lambda grid must be positive and eta grid non-negative")
    return lams, etas


def _shifted_criterion(C21, A, S21, beta1, lams, eta):
    """One ``eta`` row: ``max_j |(C21 A^{-1} (s + t beta1) - t S21 beta1)_j|``
    with ``t = 2 eta / lam``, for every ``lam``.

    ``S21`` may be ``None`` (no correction term).
    """
    s = np.sign(beta1)
    try:
        xs, xb = solve_sym(A, np.column_stack([s, beta1])).T
    except NearSingularError:
        return np.full(lams.shape, math.inf)
    corr = None if S21 is None else S21 @ beta1
    row = np.empty(lams.shape)
    for k, lam in enumerate(lams):
        t = 2.0 * eta / lam
        v = C21 @ (xs + t * xb)
        if corr is not None:
            v = v - t * corr
        row[k] = np.max(np.abs(v))
    return row


def eic_value(pm: PartitionedMoments, beta1_star, lambda_grid=DEFAULT_LAMBDA_GRID,
              eta_grid=DEFAULT_ETA_GRID) -> GridMin:
    """Elastic Net irrepresentable criterion minimized over the grid:

    ``min_{lam, eta} max_j |(C21 (C11 + eta/n I)^{-1} (sign(b1) + 2 eta/lam b1))_j|``
    """
    lams, etas = _grids(lambda_grid, eta_grid)
    b1 = np.asarray(beta1_star, dtype=np.float64)
    eye = np.eye(pm.q)
    cells = np.vstack([
        _shifted_criterion(pm.C21, pm.C11 + (eta / pm.n) * eye, None, b1, lams, eta)
        for eta in etas
    ])
    return _argmin(cells, lams, etas)


def gic_value(pm: PartitionedMoments, beta1_star, lambda_grid=DEFAULT_LAMBDA_GRID,
              eta_grid=DEFAULT_ETA_GRID) -> GridMin:
    """Generalized irrepresentable criterion minimized over the grid:

    ``min max_j |(K21 K11^{-1} (sign(b1) + 2 eta/lam b1) - 2 eta/lam Sigma21 b1)_j|``

    With ``Sigma = I`` every cell equals the corresponding EIC cell.
    """
    lams, etas = _grids(lambda_grid, eta_grid)
    b1 = np.asarray(beta1_star, dtype=np.float64)
    rows = []
    for eta in etas:
        s = eta / pm.n
        rows.append(_shifted_criterion(pm.C21 + s * pm.S21, pm.C11 + s * pm.S11,
                                       pm.S21, b1, lams, eta))
    return _argmin(np.vstack(rows), lams, etas)


@dataclass
class ConditionReport:
    ic_value: float
    eic_value: float
    gic_value: float
    eic_lambda: float
    eic_eta: float
    gic_lambda: float
    gic_eta: float
    ic_singular: bool
    lambda_grid: List[float] = field(default_factory=list)
    eta_grid: List[float] = field(default_factory=list)

    @property
    def ic_holds(self) -> bool:
        return self.ic_value < 1

    @property
    def eic_holds(self) -> bool:
        return self.eic_value < 1

    @property
    def gic_holds(self) -> bool:
        return self.gic_value < 1

    def to_dict(self) -> dict:
        out = {
            "ic_value": _finite_or_none(self.ic_value),
            "eic_value": _finite_or_none(self.eic_value),
            "gic_value": _finite_or_none(self.gic_value),
            "eic_lambda": _finite_or_none(self.eic_lambda),
            "eic_eta": _finite_or_none(self.eic_eta),
            "gic_lambda": _finite_or_none(self.gic_lambda),
            "gic_eta": _finite_or_none(self.gic_eta),
            "ic_singular": self.ic_singular,
            "ic_holds": self.ic_holds,
            "eic_holds": self.eic_holds,
            "gic_holds": self.gic_holds,
            "lambda_grid": [float(v) for v in self.lambda_grid],
            "eta_grid": [float(v) for v in self.eta_grid],
        }
        return out


def _finite_or_none(v):
    v = float(v)
    return v if math.isfinite(v) else None


def condition_report(X, Sigma, beta_star, lambda_grid=DEFAULT_LAMBDA_GRID,
                     eta_grid=DEFAULT_ETA_GRID) -> ConditionReport:
    """IC, EIC and GIC for one realization; active set read off ``beta_star``."""
    beta_star = np.asarray(beta_star, dtype=np.float64)
    q = _active_count(beta_star)
    pm = partition_moments(X, Sigma, q)
    b1 = beta_star[:q]
    ic = ic_value(pm, np.sign(b1))
    eic = eic_value(pm, b1, lambda_grid, eta_grid)
    gic = gic_value(pm, b1, lambda_grid, eta_grid)
    return ConditionReport(ic, eic.value, gic.value, eic.lam, eic.eta, gic.lam, gic.eta,
                           ic_singular=math.isinf(ic),
                           lambda_grid=list(lambda_grid), eta_grid=list(eta_grid))


def _active_count(beta_star: np.ndarray) -> int:
    nz = np.flatnonzero(beta_star)
    q = nz.size
    if not np.array_equal(nz, np.arange(q)):
        raise ValueError("non-zero coefficients must occupy the first q positions")
    return q


class Inequality(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


@dataclass
class TheoremQuantities:
    """Eigenvalue quantities and the five feasibility inequalities.

    ``checks`` keys: ``M1`` (M1 < beta_min^2 / (9 sigma^2)), ``M2_M3``
    (sqrt(2+sqrt2) sqrt(M3) sigma / alpha < beta_min / (3 M2 sqrt q)),
    ``lambda_upper``, ``lambda_lower`` and ``eta_upper`` (the latter in the
    form ``eta M2 < n / (3 lmax(Sigma11)) * beta_min / ||beta1||``).
    """

    lmax_HA: float
    lmax_C11inv: float
    lmax_HB: float
    beta_min: float
    M1: float
    M2: float
    M3: float
    alpha: float
    checks: Dict[str, Inequality]

    def to_dict(self) -> dict:
        return {
            "lmax_HA": self.lmax_HA,
            "lmax_C11inv": self.lmax_C11inv,
            "lmax_HB": self.lmax_HB,
            "beta_min": self.beta_min,
            "M1": self.M1,
            "M2": self.M2,
            "M3": self.M3,
            "alpha": _finite_or_none(self.alpha),
            "checks": {
                k: {"lhs": _finite_or_none(c.lhs), "rhs": _finite_or_none(c.rhs),
                    "holds": bool(c.holds)}
                for k, c in self.checks.items()
            },
        }


class EigenQuantities(NamedTuple):
    lmax_HA: float
    lmax_C11inv: float
    lmax_HB: float


def eigen_quantities(X, pm: PartitionedMoments) -> EigenQuantities:
    """``lmax(H_A H_A')``, ``lmax(K11^{-1})`` and ``lmax(H_B H_B')`` where

    ``H_A = n^{-1/2} K11^{-1} X1'`` and ``H_B = n^{-1/2} (K21 K11^{-1} X1' - X2')``.
    """
    X = np.asarray(X, dtype=np.float64)
    q, n = pm.q, pm.n
    X1, X2 = X[:, :q], X[:, q:]
    # raises NearSingularError when K11 is singular
    K11_inv_X1t = solve_sym(pm.K11, X1.T)
    HA = K11_inv_X1t / math.sqrt(n)
    lmax_HA = lambda_max(HA @ HA.T)
    lmax_C11inv = 1.0 / float(eigen_sym(pm.K11).eigenvalues[-1])
    HB = (pm.K21 @ K11_inv_X1t - X2.T) / math.sqrt(n)
    gram = HB @ HB.T if HB.shape[0] <= HB.shape[1] else HB.T @ HB
    return EigenQuantities(lmax_HA, lmax_C11inv, max(lambda_max(gram), 0.0))


def eta_condition(eta: float, M2: float, n: int, S11, beta1) -> Inequality:
    """``eta * M2 < n / (3 lmax(Sigma11)) * beta_min / ||beta1||_2``."""
    b1 = np.asarray(beta1, dtype=np.float64)
    rhs = n / (3.0 * lambda_max(S11)) * float(np.min(np.abs(b1))) / float(np.linalg.norm(b1))
    lhs = eta * M2
    return Inequality(lhs, rhs, lhs < rhs)


def theorem_quantities(X, Sigma, beta_star, penalty: PenaltyConfig, sigma_noise: float,
                       M_estimates: Optional[Sequence[float]] = None,
                       alpha_margin: Optional[float] = None) -> TheoremQuantities:
    """Evaluate the eigenvalue quantities and feasibility inequalities at one
    ``(lambda, eta)``.

    ``M_estimates`` defaults to the empirical eigenvalues themselves.
    ``alpha_margin`` defaults to ``1 - `` the GIC cell value at this
    ``(lambda, eta)``; a non-positive margin makes both checks that divide by
    it fail.
    """
    beta_star = np.asarray(beta_star, dtype=np.float64)
    q = _active_count(beta_star)
    if q < 1:
        raise ValueError("theorem quantities need at least one active coefficient")
    pm = partition_moments(X, Sigma, q, penalty.eta)
    eq = eigen_quantities(X, pm)
    M1, M2, M3 = eq if M_estimates is None else (float(m) for m in M_estimates)
    b1 = beta_star[:q]
    beta_min = float(np.min(np.abs(b1)))
    n = pm.n
    lam, eta = penalty.lam, penalty.eta
    if alpha_margin is None:
        cell = gic_value(pm, b1, [lam], [eta]).value if lam > 0 else math.inf
        alpha_margin = 1.0 - cell
    alpha = float(alpha_margin)
    sigma = float(sigma_noise)

    checks = {}
    rhs = beta_min ** 2 / (9.0 * sigma ** 2) if sigma > 0 else math.inf
    checks["M1"] = Inequality(M1, rhs, M1 < rhs)
    upper = 2.0 * beta_min / (3.0 * M2 * math.sqrt(q))
    if alpha > 0:
        noise_term = _SQRT_2_PLUS_SQRT_2 * math.sqrt(M3) * sigma / alpha
        checks["M2_M3"] = Inequality(noise_term, upper / 2.0, noise_term < upper / 2.0)
        lower = 2.0 * noise_term
        checks["lambda_lower"] = Inequality(lam / n, lower, lam / n >= lower)
    else:
        checks["M2_M3"] = Inequality(math.inf, upper / 2.0, False)
        checks["lambda_lower"] = Inequality(lam / n, math.inf, False)
    checks["lambda_upper"] = Inequality(lam / n, upper, lam / n < upper)
    checks["eta_upper"] = eta_condition(eta, M2, n, pm.S11, b1)
    return TheoremQuantities(eq.lmax_HA, eq.lmax_C11inv, eq.lmax_HB, beta_min,
                             M1, M2, M3, alpha, checks)


@dataclass
class LemmaEventReport:
    an_holds: bool
    bn_holds: bool
    Wn1: np.ndarray
    Wn2: np.ndarray
    an_margin: np.ndarray
    bn_margin: np.ndarray

    def to_dict(self) -> dict:
        return {
            "an_holds": bool(self.an_holds),
            "bn_holds": bool(self.bn_holds),
            "Wn1": self.Wn1.tolist(),
            "Wn2": self.Wn2.tolist(),
            "an_margin": self.an_margin.tolist(),
            "bn_margin": self.bn_margin.tolist(),
        }


def lemma_events(dataset, Sigma, penalty: PenaltyConfig) -> LemmaEventReport:
    """Evaluate the two noise events whose joint occurrence forces exact sign
    recovery by the gEN estimator.

    With ``W = X' eps / sqrt(n)`` split into ``W1`` (active) and ``W2``:

    * A: ``|K11^{-1} W1| < sqrt(n) (|b1| - lam/(2n) |K11^{-1} s| - eta/n |K11^{-1} S11 b1|)``
      coordinate-wise;
    * B: ``|K21 K11^{-1} W1 - W2| <= lam/(2 sqrt n) - lam/(2 sqrt n)
      |K21 K11^{-1} (s + 2eta/lam S11 b1) - 2eta/lam S21 b1|`` coordinate-wise.

    Margins are ``rhs - lhs``; A needs all margins strictly positive, B all
    non-negative.
    """
    X = np.asarray(dataset.X, dtype=np.float64)
    eps = np.asarray(dataset.epsilon, dtype=np.float64)
    beta_star = np.asarray(dataset.beta_star, dtype=np.float64)
    n, p = X.shape
    q = _active_count(beta_star)
    S = sym_matrix(Sigma)
    W = X.T @ eps / math.sqrt(n)
    W1, W2 = W[:q], W[q:]
    if q == 0:
        return LemmaEventReport(True, bool(np.all(np.abs(W2) <= penalty.lam / (2 * math.sqrt(n)))),
                                W1, W2, np.zeros(0), penalty.lam / (2 * math.sqrt(n)) - np.abs(W2))
    lam, eta = penalty.lam, penalty.eta
    C = X.T @ X / n
    K11 = C[:q, :q] + (eta / n) * S[:q, :q]
    K11 = 0.5 * (K11 + K11.T)
    K21 = C[q:, :q] + (eta / n) * S[q:, :q]
    b1 = beta_star[:q]
    s = np.sign(b1)
    S11b = S[:q, :q] @ b1
    zeta, inv_s, inv_Sb = solve_sym(K11, np.column_stack([W1, s, S11b])).T
    tau = math.sqrt(n) * (np.abs(b1) - lam / (2 * n) * np.abs(inv_s) - eta / n * np.abs(inv_Sb))
    an_margin = tau - np.abs(zeta)
    if q == p:
        bn_margin = np.zeros(0)
    else:
        rn = math.sqrt(n)
        lhs = np.abs(K21 @ zeta - W2)
        # lam/(2 sqrt n) * (2 eta / lam) = eta / sqrt n, which stays defined at lam = 0
        shift = (lam / (2 * rn)) * (K21 @ inv_s) + (eta / rn) * (K21 @ inv_Sb - S[q:, :q] @ b1)
        bn_margin = lam / (2 * rn) - np.abs(shift) - lhs
    return LemmaEventReport(bool(np.all(an_margin > 0)), bool(np.all(bn_margin >= 0)),
                            W1, W2, an_margin, bn_margin)
