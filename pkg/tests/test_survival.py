import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import brute
from conftest import random_survival
from optsub import simgen
from optsub.errors import DimensionMismatch, EmptyRiskSet, NotConverged, ZeroProbability
from optsub.numerics import invert_spd, sandwich
from optsub.survival import (
    SurvivalDataset,
    SurvivalRecord,
    a_vectors,
    breslow,
    cox_variance,
    fit_cox,
    phi_from_draws,
    phi_from_vectors,
    phi_matrix,
    pl_information,
    pl_loglik,
    pl_score,
    risk_aggregates,
)


def three_subjects():
    return SurvivalDataset([6.0, 7.0, 5.0], [0, 0, 1], [[1.0], [2.0], [3.0]])


def test_record_validation():
    with pytest.raises(ValueError):
        SurvivalRecord(exit=1.0, status=1, covariates=(0.0,), entry=1.0)
    with pytest.raises(ValueError):
        SurvivalRecord(exit=1.0, status=2, covariates=(0.0,))
    with pytest.raises(ValueError):
        SurvivalRecord(exit=1.0, status=0, covariates=(np.inf,))


def test_dataset_partition():
    d = random_survival(np.random.default_rng(0), n=40)
    assert sorted(np.concatenate([d.events, d.censored])) == list(range(40))
    assert d.n_e + d.n_c == d.n
    assert d.tau == d.exit.max()


def test_risk_aggregates_examples():
    s0, s1, s2 = risk_aggregates([0.0], three_subjects(), 1.0)
    assert (s0, float(s1[0]), float(s2[0, 0])) == (3.0, 6.0, 14.0)
    one = SurvivalDataset([2.0], [1], [[1.0]])
    s0, s1, s2 = risk_aggregates([math.log(2)], one, 1.0)
    assert s0 == pytest.approx(2.0) and s1[0] == pytest.approx(2.0) and s2[0, 0] == pytest.approx(2.0)
    with pytest.raises(EmptyRiskSet):
        risk_aggregates([0.0], three_subjects(), 10.0)


def test_risk_set_respects_entry():
    d = SurvivalDataset([3.0, 4.0], [1, 0], [[1.0], [5.0]], entry=[0.0, 3.0])
    s0, s1, _ = risk_aggregates([0.0], d, 3.0)
    assert s0 == 1.0 and s1[0] == 1.0


def test_score_examples():
    assert pl_score([0.0], three_subjects())[0] == pytest.approx(3 - 6 / 3)
    no_events = SurvivalDataset([1.0, 2.0], [0, 0], [[1.0], [2.0]])
    assert np.all(pl_score([0.0], no_events) == 0)


def test_score_two_events_enumerated():
    d = SurvivalDataset([1.0, 2.0, 3.0, 4.0], [1, 0, 1, 0], [[0.5], [1.0], [2.0], [-1.0]])
    # event at 1: everyone at risk; event at 3: records 3 and 4
    want = (0.5 - (0.5 + 1 + 2 - 1) / 4) + (2.0 - (2 - 1) / 2)
    assert pl_score([0.0], d)[0] == pytest.approx(want)


def test_information_examples():
    single = SurvivalDataset([1.0], [1], [[2.0]])
    assert pl_information([0.0], single)[0, 0] == pytest.approx(0.0)
    d = SurvivalDataset([1.0, 2.0], [1, 0], [[0.0], [1.0]])
    assert pl_information([0.0], d)[0, 0] == pytest.approx(0.25 / 2)


def test_score_and_information_match_loops():
    rng = np.random.default_rng(5)
    d = random_survival(rng, n=50, r=3, ties=True, late_entry=True)
    beta = rng.normal(scale=0.4, size=3)
    np.testing.assert_allclose(pl_score(beta, d), brute.cox_score(beta, d), rtol=1e-11, atol=1e-12)
    np.testing.assert_allclose(pl_information(beta, d), brute.cox_information(beta, d), rtol=1e-11, atol=1e-13)
    assert pl_loglik(beta, d) == pytest.approx(brute.cox_loglik(beta, d), rel=1e-12)


def test_information_is_finite_difference_of_score():
    rng = np.random.default_rng(6)
    d = random_survival(rng, n=50, r=3)
    beta, h = rng.normal(scale=0.5, size=3), 1e-5
    jac = np.column_stack([(pl_score(beta + h * e, d) - pl_score(beta - h * e, d)) / (2 * h) for e in np.eye(3)])
    np.testing.assert_allclose(pl_information(beta, d), -jac / d.n, rtol=1e-5)


def test_large_linear_predictor_does_not_overflow():
    d = SurvivalDataset([1.0, 2.0, 3.0], [1, 1, 0], [[800.0], [801.0], [799.0]])
    assert np.all(np.isfinite(pl_score([1.0], d)))
    assert np.all(np.isfinite(pl_information([1.0], d)))


def test_breslow_examples():
    d = SurvivalDataset([1.0, 1.5, 1.5, 2.0], [1, 0, 0, 1], [[0.0]] * 4)
    assert breslow([0.0], d, 0.5) == 0.0
    assert breslow([0.0], d, 2.0) == pytest.approx(1 / 4 + 1 / 1)
    d3 = SurvivalDataset([1.0, 1.5, 2.0], [1, 0, 1], [[0.0]] * 3)
    assert breslow([0.0], d3, 2.0) == pytest.approx(1 / 3 + 1)


def test_breslow_matches_loop_and_is_order_invariant():
    rng = np.random.default_rng(8)
    d = random_survival(rng, n=40, r=2, ties=True)
    beta = np.array([0.3, -0.2])
    assert breslow(beta, d, d.tau) == pytest.approx(brute.breslow(beta, d, d.tau), rel=1e-12)
    perm = rng.permutation(d.n)
    shuffled = SurvivalDataset(d.exit[perm], d.status[perm], d.x[perm])
    assert breslow(beta, shuffled, d.tau) == pytest.approx(breslow(beta, d, d.tau), rel=1e-12)


def test_a_vectors_examples():
    d = SurvivalDataset([0.5, 1.0, 2.0], [0, 1, 0], [[1.0], [0.0], [1.0]])
    a = a_vectors([0.0], d)
    # first censored row leaves before any event
    assert np.all(a[0] == 0)
    # second: at risk at t=1 with S0 = 2, xbar = 0.5
    assert a[1, 0] == pytest.approx((1 - 0.5) / 2)


def test_a_vectors_match_loop():
    rng = np.random.default_rng(9)
    d = random_survival(rng, n=30, r=2, late_entry=True)
    beta = rng.normal(size=2) * 0.5
    want = np.array([brute.a_vector(beta, d, i) for i in d.censored])
    np.testing.assert_allclose(a_vectors(beta, d), want, rtol=1e-12, atol=1e-14)


def test_phi_examples():
    a = np.array([[0.3, -0.2]])
    assert np.all(np.abs(phi_from_vectors(a, np.array([1.0]), 10)) < 1e-18)
    same = np.tile([[0.4, 0.1]], (5, 1))
    assert np.max(np.abs(phi_from_vectors(same, np.full(5, 0.2), 7))) < 1e-15
    a = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
    p = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(phi_from_vectors(a, p, 4), brute.phi_double_loop(a, p, 4), rtol=1e-13)


def test_phi_zero_probability():
    with pytest.raises(ZeroProbability):
        phi_from_vectors(np.array([[1.0]]), np.array([0.0]), 3)
    # zero vector may carry zero probability
    out = phi_from_vectors(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]), 3)
    assert out[0, 0] == pytest.approx(0.0)


def test_phi_draws_exhaustive_equals_full_form():
    rng = np.random.default_rng(10)
    a = rng.normal(size=(8, 2))
    p = np.full(8, 1 / 8)
    # drawing each row once under uniform probabilities: q * sum(a a^T / (q p)^2) / q^2 reduces to the full form
    np.testing.assert_allclose(phi_from_draws(a, p, 20, 8), phi_from_vectors(a, p, 20), atol=1e-15)


def test_cox_variance_composition_and_limits():
    rng = np.random.default_rng(11)
    d = random_survival(rng, n=80, r=2)
    beta = np.array([0.2, -0.1])
    p = np.full(d.n_c, 1 / d.n_c)
    info_inv = invert_spd(pl_information(beta, d))
    phi = phi_from_vectors(a_vectors(beta, d), p, d.n)
    q = 15
    np.testing.assert_allclose(cox_variance(p, beta, d, q), info_inv + (d.n / q) * sandwich(info_inv, phi), rtol=1e-12)
    far = cox_variance(p, beta, d, 1e12)
    assert np.linalg.norm(far - info_inv) < 1e-9 * np.linalg.norm(info_inv)
    assert np.trace(cox_variance(p, beta, d, q)) >= np.trace(info_inv)
    single = SurvivalDataset([1.0, 2.0, 3.0], [1, 1, 0], [[0.0], [1.0], [0.5]])
    np.testing.assert_allclose(cox_variance(np.array([1.0]), [0.1], single, 5), invert_spd(pl_information([0.1], single)))


def test_phi_matrix_on_subsample_uses_draw_form():
    rng = np.random.default_rng(12)
    d = random_survival(rng, n=60, r=2)
    cens = d.censored
    p = np.full(cens.size, 1 / cens.size)
    sub = d.subsample(cens[:10], p[:10], 10)
    beta = np.zeros(2)
    want = phi_from_draws(a_vectors(beta, sub, sub.censored), p[:10], d.n, 10)
    np.testing.assert_allclose(phi_matrix(None, beta, sub), want)


def test_subsample_weights():
    d = random_survival(np.random.default_rng(13), n=30)
    cens = d.censored
    members = cens[[0, 0, 1]]
    sub = d.subsample(members, np.array([0.1, 0.1, 0.2]), 3)
    assert np.all(sub.weights[: d.n_e] == 1)
    np.testing.assert_allclose(sub.weights[d.n_e :], 1 / (np.array([0.1, 0.1, 0.2]) * 3))
    assert sub.n_total == 30
    with pytest.raises(ValueError):
        d.subsample(d.events[:1], np.array([0.5]), 1)
    with pytest.raises(ZeroProbability):
        d.subsample(cens[:1], np.array([0.0]), 1)


def test_exhaustive_subsample_equals_full_data():
    d = random_survival(np.random.default_rng(14), n=120, r=3)
    cens = d.censored
    sub = d.subsample(cens, np.full(cens.size, 1 / cens.size), cens.size)
    beta = np.array([0.1, 0.2, -0.3])
    np.testing.assert_allclose(pl_score(beta, sub), pl_score(beta, d), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(pl_information(beta, sub), pl_information(beta, d), rtol=1e-12)
    assert np.max(np.abs(fit_cox(sub).beta - fit_cox(d).beta)) <= 1e-10


def test_fit_matches_statsmodels():
    sm = pytest.importorskip("statsmodels.duration.hazard_regression")
    rng = np.random.default_rng(15)
    d = random_survival(rng, n=200, r=3, ties=True, late_entry=True)
    ours = fit_cox(d)
    ref = sm.PHReg(d.exit, d.x, status=d.status, entry=d.entry, ties="breslow").fit()
    np.testing.assert_allclose(ours.beta, ref.params, atol=1e-7)
    np.testing.assert_allclose(invert_spd(ours.information) / d.n, ref.cov_params(), rtol=1e-5)


def test_fit_setting_one_draw_converges():
    d = simgen.gen_cox(simgen.CoxSimConfig("I", n=200, hazard_jump=0.3, seed=1))
    fit = fit_cox(d)
    assert fit.converged and fit.max_score_norm < 1e-8
    assert np.max(np.abs(pl_score(fit.beta, d))) < 1e-8


def test_monotone_likelihood_diverges():
    # every event is in group 0 while group 1 is still at risk
    x = np.array([[0.0], [0.0], [0.0], [1.0], [1.0], [1.0]])
    d = SurvivalDataset([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], [1, 1, 1, 0, 0, 0], x)
    with pytest.raises(NotConverged):
        fit_cox(d)


def test_fit_errors():
    with pytest.raises(ValueError):
        fit_cox(SurvivalDataset([1.0, 2.0], [0, 0], [[1.0], [2.0]]))
    with pytest.raises(DimensionMismatch):
        pl_score([0.0, 0.0], three_subjects())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 10.0))
def test_reweighted_censored_rows_keep_information_psd(seed, c):
    d = random_survival(np.random.default_rng(seed), n=25, r=2)
    scaled = SurvivalDataset(d.exit, d.status, d.x, weights=np.where(d.status == 1, 1.0, c))
    beta = np.array([0.2, -0.4])
    assert np.all(np.isfinite(pl_score(beta, scaled)))
    info = pl_information(beta, scaled)
    assert np.min(np.linalg.eigvalsh(info)) >= -1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_information_psd_and_phi_psd(seed):
    rng = np.random.default_rng(seed)
    d = random_survival(rng, n=30, r=3, late_entry=bool(seed % 2))
    beta = rng.normal(scale=0.5, size=3)
    assert np.min(np.linalg.eigvalsh(pl_information(beta, d))) >= -1e-12
    p = rng.uniform(0.05, 1, d.n_c)
    p /= p.sum()
    phi = phi_from_vectors(a_vectors(beta, d), p, d.n)
    assert np.min(np.linalg.eigvalsh(phi)) >= -1e-12 * max(1.0, np.max(np.abs(phi)))
