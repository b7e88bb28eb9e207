import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genen.conditions import (
    condition_report,
    eic_value,
    gic_value,
    ic_value,
    lemma_events,
    partition_moments,
    theorem_quantities,
)
from genen.metrics import selection_metrics
from genen.simulate import CovarianceSpec, TruthSpec, build_covariance, sample_dataset
from genen.solvers import PenaltyConfig, fit_gen_elastic_net

LAMS = tuple(np.logspace(-1, 3, 7))
ETAS = (0.0, 0.1, 1.0, 10.0, 100.0)


def orthonormal_design(n, p, seed=0):
    Q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, p)))
    return math.sqrt(n) * Q


def draw(p=12, q=3, n=30, b=2.0, seed=0, sigma=1.0):
    spec = CovarianceSpec(p, q)
    return sample_dataset(spec, TruthSpec(q, b), n, sigma=sigma, seed=seed), build_covariance(spec)


def test_partition_orthonormal_blocks():
    X = orthonormal_design(20, 5)
    pm = partition_moments(X, np.eye(5), 2)
    np.testing.assert_allclose(pm.C11, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(pm.C21, 0, atol=1e-12)
    np.testing.assert_array_equal(pm.K11, pm.C11)


def test_partition_direct_blocks():
    d, S = draw()
    eta = 3.0
    pm = partition_moments(d.X, S, 3, eta)
    X1, X2 = d.X[:, :3], d.X[:, 3:]
    n = d.n
    assert np.max(np.abs(pm.C11 - X1.T @ X1 / n)) < 1e-12
    assert np.max(np.abs(pm.C21 - X2.T @ X1 / n)) < 1e-12
    assert np.max(np.abs(pm.C22 - X2.T @ X2 / n)) < 1e-12
    assert np.array_equal(pm.C12, pm.C21.T)
    assert np.max(np.abs(pm.K11 - (X1.T @ X1 + eta * S[:3, :3]) / n)) < 1e-12
    assert np.max(np.abs(pm.K21 - (X2.T @ X1 + eta * S[3:, :3]) / n)) < 1e-12
    assert np.array_equal(pm.with_eta(0.0).K11, pm.C11)


def test_partition_validation():
    X = np.ones((4, 3))
    with pytest.raises(ValueError):
        partition_moments(X, np.eye(3), 0)
    with pytest.raises(ValueError):
        partition_moments(X, np.eye(3), 3)
    with pytest.raises(ValueError):
        partition_moments(X, np.eye(2), 1)


def test_ic_zero_without_cross_correlation():
    pm = partition_moments(orthonormal_design(20, 5), np.eye(5), 2)
    assert ic_value(pm, [1, -1]) < 1e-12


def test_ic_scalar_case():
    X = np.array([[1.0, 0.5], [1.0, -0.1], [-1.0, -0.9]])
    pm = partition_moments(X, np.eye(2), 1)
    expected = abs((X[:, 1] @ X[:, 0]) / (X[:, 0] @ X[:, 0]))
    assert ic_value(pm, [1.0]) == pytest.approx(expected, rel=1e-12)


def test_ic_matches_explicit_inverse():
    d, S = draw(seed=3)
    pm = partition_moments(d.X, S, 3)
    s = np.sign(d.beta_star[:3])
    expected = np.max(np.abs(pm.C21 @ np.linalg.inv(pm.C11) @ s))
    assert ic_value(pm, s) == pytest.approx(expected, rel=1e-9)


def test_ic_singular_is_infinite():
    X = np.ones((5, 3))
    pm = partition_moments(X, np.eye(3), 2)
    assert ic_value(pm, [1, 1]) == math.inf
    rpt = condition_report(X, np.eye(3), [1.0, 1.0, 0.0], LAMS, ETAS)
    assert rpt.ic_singular and rpt.to_dict()["ic_value"] is None


def test_eic_without_ridge_equals_ic():
    d, S = draw(seed=4)
    pm = partition_moments(d.X, S, 3)
    b1 = d.beta_star[:3]
    cells = eic_value(pm, b1, LAMS, [0.0]).cells
    np.testing.assert_allclose(cells, ic_value(pm, np.sign(b1)), rtol=1e-12)


def test_eic_cell_matches_explicit_formula():
    d, S = draw(seed=5)
    pm = partition_moments(d.X, S, 3)
    b1 = d.beta_star[:3]
    lam, eta = 10.0, 5.0
    A = pm.C11 + eta / d.n * np.eye(3)
    expected = np.max(np.abs(pm.C21 @ np.linalg.inv(A) @ (np.sign(b1) + 2 * eta / lam * b1)))
    assert eic_value(pm, b1, [lam], [eta]).value == pytest.approx(expected, rel=1e-9)


def test_gic_cell_matches_explicit_formula():
    d, S = draw(seed=6)
    pm = partition_moments(d.X, S, 3)
    b1 = d.beta_star[:3]
    lam, eta = 7.0, 20.0
    K11 = pm.C11 + eta / d.n * S[:3, :3]
    K21 = pm.C21 + eta / d.n * S[3:, :3]
    t = 2 * eta / lam
    expected = np.max(np.abs(K21 @ np.linalg.inv(K11) @ (np.sign(b1) + t * b1) - t * S[3:, :3] @ b1))
    assert gic_value(pm, b1, [lam], [eta]).value == pytest.approx(expected, rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_gic_identity_sigma_equals_eic(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((25, 8))
    pm = partition_moments(X, np.eye(8), 2)
    b1 = rng.choice([-1.0, 1.0], 2) * rng.uniform(0.5, 5, 2)
    g = gic_value(pm, b1, LAMS, ETAS)
    e = eic_value(pm, b1, LAMS, ETAS)
    assert np.max(np.abs(g.cells - e.cells)) <= 1e-12


def test_grid_minimum_location():
    d, S = draw(seed=7)
    pm = partition_moments(d.X, S, 3)
    g = gic_value(pm, d.beta_star[:3], LAMS, ETAS)
    i, j = ETAS.index(g.eta), LAMS.index(g.lam)
    assert g.cells[i, j] == g.value == g.cells.min()
    assert g.cells.shape == (len(ETAS), len(LAMS))


def test_grid_validation():
    d, S = draw()
    pm = partition_moments(d.X, S, 3)
    with pytest.raises(ValueError):
        gic_value(pm, d.beta_star[:3], [], ETAS)
    with pytest.raises(ValueError):
        eic_value(pm, d.beta_star[:3], [0.0], ETAS)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_criteria_invariant_to_inactive_permutation(seed):
    d, S = draw(seed=seed)
    rng = np.random.default_rng(seed)
    perm = np.concatenate([rng.permutation(3), 3 + rng.permutation(9)])
    base = condition_report(d.X, S, d.beta_star, LAMS, ETAS)
    # keep the active block first so the support still occupies leading positions
    moved = condition_report(d.X[:, perm], S[np.ix_(perm, perm)], d.beta_star[perm], LAMS, ETAS)
    for key in ("ic_value", "eic_value", "gic_value"):
        assert getattr(moved, key) == pytest.approx(getattr(base, key), rel=1e-9, abs=1e-12)


def test_condition_report_json():
    d, S = draw(seed=8)
    rpt = condition_report(d.X, S, d.beta_star, LAMS, ETAS)
    rec = json.loads(json.dumps(rpt.to_dict()))
    assert rec["gic_holds"] == (rec["gic_value"] < 1)
    assert rec["lambda_grid"] == list(LAMS) and rec["eta_grid"] == list(ETAS)


def test_condition_report_rejects_scattered_support():
    d, S = draw()
    with pytest.raises(ValueError):
        condition_report(d.X, S, np.r_[0.0, 1.0, np.zeros(10)], LAMS, ETAS)


def test_theorem_quantities_orthonormal():
    n, p, q = 40, 6, 2
    X = orthonormal_design(n, p)
    beta = np.r_[5.0, -5.0, np.zeros(p - q)]
    tq = theorem_quantities(X, np.eye(p), beta, PenaltyConfig(10.0, 0.0), 1.0)
    assert tq.lmax_HA == pytest.approx(1.0, abs=1e-10)
    assert tq.lmax_C11inv == pytest.approx(1.0, abs=1e-10)
    assert tq.lmax_HB == pytest.approx(1.0, abs=1e-10)
    assert tq.alpha == pytest.approx(1.0, abs=1e-10)
    assert tq.checks["eta_upper"].holds


def test_theorem_quantities_single_active():
    d, S = draw(q=1, seed=9)
    eta = 2.0
    tq = theorem_quantities(d.X, S, d.beta_star, PenaltyConfig(5.0, eta), 1.0)
    k11 = d.X[:, 0] @ d.X[:, 0] / d.n + eta / d.n
    assert tq.lmax_C11inv == pytest.approx(1 / k11, rel=1e-10)
    assert tq.lmax_HA == pytest.approx((d.X[:, 0] @ d.X[:, 0] / d.n) / k11 ** 2, rel=1e-10)
    assert set(tq.checks) == {"M1", "M2_M3", "lambda_upper", "lambda_lower", "eta_upper"}


def test_lambda_lower_monotone():
    d, S = draw(seed=10)
    held = [theorem_quantities(d.X, S, d.beta_star, PenaltyConfig(lam, 1.0), 1.0,
                               alpha_margin=0.5).checks["lambda_lower"].holds
            for lam in np.logspace(-2, 4, 25)]
    assert held == sorted(held)
    assert held[-1]


def test_nonpositive_margin_fails_dependent_checks():
    d, S = draw(seed=11)
    tq = theorem_quantities(d.X, S, d.beta_star, PenaltyConfig(1.0, 1.0), 1.0, alpha_margin=-0.2)
    assert not tq.checks["M2_M3"].holds and not tq.checks["lambda_lower"].holds
    json.dumps(tq.to_dict())


def test_theorem_user_estimates_override():
    d, S = draw(seed=12)
    tq = theorem_quantities(d.X, S, d.beta_star, PenaltyConfig(1.0, 1.0), 1.0,
                            M_estimates=(1.0, 2.0, 3.0))
    assert (tq.M1, tq.M2, tq.M3) == (1.0, 2.0, 3.0)
    assert tq.checks["M1"].lhs == 1.0


def test_lemma_noiseless_events_hold():
    d, S = draw(p=10, q=2, n=200, b=5.0, seed=13, sigma=0.0)
    rpt = lemma_events(d, S, PenaltyConfig(1.0, 0.1))
    assert rpt.an_holds
    # with zero noise the B margin is lam/(2 sqrt n) * (1 - GIC cell)
    pm = partition_moments(d.X, S, 2)
    cell = gic_value(pm, d.beta_star[:2], [1.0], [0.1]).value
    assert rpt.bn_holds == (cell <= 1)
    np.testing.assert_allclose(rpt.Wn1, 0)


def test_lemma_huge_lambda_breaks_a():
    d, S = draw(seed=14)
    assert not lemma_events(d, S, PenaltyConfig(1e6, 1.0)).an_holds


def test_lemma_events_imply_sign_recovery():
    spec = CovarianceSpec(20, 3, 0.3, 0.2, 0.3)
    S = build_covariance(spec)
    held = 0
    for seed in range(15):
        d = sample_dataset(spec, TruthSpec(3, 3.0), 100, seed=seed)
        pen = PenaltyConfig(10.0 * math.sqrt(d.n), 1.0)
        rpt = lemma_events(d, S, pen)
        if rpt.an_holds and rpt.bn_holds:
            held += 1
            fit = fit_gen_elastic_net(d.X, d.y, S, pen)
            assert selection_metrics(fit.beta_hat, d.beta_star, 3)["sign_exact"]
    assert held >= 5
    json.dumps(rpt.to_dict())
