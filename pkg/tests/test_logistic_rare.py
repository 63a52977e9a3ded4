import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_binary
from optsub import logistic_rare as rare
from optsub import simgen
from optsub.cox_subsampling import normalize_scores
from optsub.errors import AllZeroScores
from optsub.logistic import BinaryDataset, fit_logistic, inverse, k_rare_full, m_x
from optsub.numerics import frobenius_norm, sandwich
from optsub.sampling import make_rng
from optsub.sizing import power_z


def logit(p):
    return math.log(p / (1 - p))


def test_a_probs_identity_information():
    # two equal-norm non-cases with mu 0.1 and 0.3, plus one case
    d = BinaryDataset([0, 0, 1], [[1.0], [-1.0], [0.0]])
    beta = [(logit(0.1) + logit(0.3)) / 2, (logit(0.1) - logit(0.3)) / 2]
    np.testing.assert_allclose(rare.rare_a_probs(beta, d, m=np.eye(2)), [0.25, 0.75])


def test_l_probs_examples():
    # |x| = 1 and 3 with equal mu
    d = BinaryDataset([0, 0, 1], [[0.0], [math.sqrt(8.0)], [1.0]])
    np.testing.assert_allclose(rare.rare_l_probs([0.0, 0.0], d), [0.25, 0.75])
    np.testing.assert_allclose(rare.rare_a_probs([0.3, -0.2], d, m=np.eye(2)), rare.rare_l_probs([0.3, -0.2], d))
    single = BinaryDataset([0, 1, 1], [[0.5], [1.0], [2.0]])
    np.testing.assert_allclose(rare.rare_l_probs([0.0, 0.1], single), [1.0])
    same = BinaryDataset([0, 0, 0, 1], [[0.7], [0.7], [0.7], [0.1]])
    np.testing.assert_allclose(rare.rare_a_probs([0.2, 0.3], same), 1 / 3)


def test_zero_mass_noncase_never_drawn():
    d = BinaryDataset([0, 0, 1, 1], [[0.0], [2.0], [1.0], [0.2]])
    drawn = rare.draw_rare(d, np.array([0.0, 1.0]), 50, make_rng(0))
    assert set(drawn.source[drawn.y == 0]) == {1}
    assert np.all(drawn.y[drawn.source >= 2] == 1)
    with pytest.raises(AllZeroScores):
        normalize_scores(np.zeros(3))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_probabilities_scale_invariant(seed, c):
    d = random_binary(np.random.default_rng(seed), n=40, r=2)
    b = np.array([-1.0, 0.3, 0.2])
    m = m_x(b, d)
    np.testing.assert_allclose(rare.rare_a_probs(b, d, m=c * m), rare.rare_a_probs(b, d, m=m), rtol=1e-12)


def test_exhaustive_draw_reproduces_mle():
    d = random_binary(np.random.default_rng(1), n=300, r=3, intercept=-2.0)
    sub = d.rare_subsample(d.noncases, np.full(d.n0, 1.0 / d.n0), d.n0)
    assert np.all(sub.weights == 1)
    assert np.max(np.abs(fit_logistic(sub).beta - fit_logistic(d).beta)) <= 1e-10


def test_two_step_reproducible():
    d = simgen.gen_logistic(simgen.LogisticSimConfig("mzNormal", n=20_000, seed=1))
    a = rare.run_two_step_rare(d, rare.default_q0(d), 2000, "A", seed=3)[1]
    b = rare.run_two_step_rare(d, rare.default_q0(d), 2000, "A", seed=3)[1]
    assert np.array_equal(a.beta, b.beta) and np.array_equal(a.covariance, b.covariance)
    assert a.n == d.n and a.q == 2000


def test_pilot_validation():
    d = random_binary(np.random.default_rng(2), n=50, r=2)
    with pytest.raises(ValueError):
        rare.run_pilot(d, 2)
    assert rare.default_q0(d) == max(d.n1, d.dim + 1)


def test_step15_structure():
    d = simgen.gen_logistic(simgen.LogisticSimConfig("mzNormal", n=20_000, seed=2))
    pilot = rare.run_pilot(d, rare.default_q0(d), "A", seed=1)
    s15 = rare.rare_step_15(d, pilot, seed=1)
    np.testing.assert_allclose(s15.h_check, s15.h_check.T, rtol=1e-12, atol=0)
    zero = rare.RareStep15(s15.m_check_inv, np.zeros_like(s15.k_check), s15.n, s15.q0)
    np.testing.assert_array_equal(zero.h_check, s15.m_check_inv)
    np.testing.assert_allclose(rare.rare_re_curve(zero, [1, 100, 10**6]).re, 1.0)
    assert rare.rare_re_curve(s15, [10**12]).re[0] - 1 < 1e-9


def test_step15_information_close_to_full_data():
    # pilot of twice the case count; at one times the count the hit rate is about 84%
    hits, reps = 0, 100
    for rep in range(reps):
        d = simgen.gen_logistic(simgen.LogisticSimConfig("mzNormal", n=5000, seed=5, rep=rep))
        pilot = rare.run_pilot(d, rare.default_q0(d, 2.0), "A", seed=rep)
        s15 = rare.rare_step_15(d, pilot, seed=rep)
        full = inverse(m_x(pilot.beta_u, d))
        hits += frobenius_norm(s15.m_check_inv - full) / frobenius_norm(full) < 0.25
    assert hits >= 90


def test_re_curve_monotone_with_unit_limit():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, k = rng.normal(size=(2, 3, 3))
        s15 = rare.RareStep15(a @ a.T + np.eye(3), k @ k.T, 100_000, 500)
        report = rare.rare_re_curve(s15, [1, 10, 100, 1000, 10**18])
        assert np.all(np.diff(report.re) <= 1e-12) and np.all(report.re >= 1 - 1e-12)
        assert report.re[-1] - 1 < 1e-9
        per = rare.rare_re_curve(s15, [10, 100], target_p=2).re
        assert per[0] >= per[1] >= 1
    with pytest.raises(ValueError):
        rare.rare_re_curve(s15, [0])


def test_power_size_worked_example():
    s15 = rare.RareStep15(np.array([[2.0]]), np.array([[0.5 / 4.0]]), 100_000, 1000)
    assert s15.noise[0, 0] == pytest.approx(0.5)
    ps = rare.rare_qn_for_power(s15, 0, 0.05, 0.05, 0.9)
    assert ps.feasible and ps.q == 2295
    z = power_z(0.05, 0.9)
    assert ps.q == math.ceil(0.5 * z**2 / (0.05**2 - 2.0 * z**2 / 1e5))
    small = rare.RareStep15(np.array([[2.0]]), np.array([[0.125]]), 100, 1000)
    assert not rare.rare_qn_for_power(small, 0, 0.05, 0.05, 0.9).feasible
    with pytest.raises(ValueError):
        rare.rare_qn_for_power(s15, 0, 0.0)


def test_power_size_monotone_grid():
    s15 = rare.RareStep15(np.array([[2.0]]), np.array([[0.125]]), 100_000, 1000)
    by_beta = [rare.rare_qn_for_power(s15, 0, b, 0.05, 0.8).q for b in (0.03, 0.05, 0.1, 0.2)]
    by_gamma = [rare.rare_qn_for_power(s15, 0, 0.05, 0.05, g).q for g in (0.6, 0.8, 0.9, 0.95)]
    assert by_beta == sorted(by_beta, reverse=True) and len(set(by_beta)) == 4
    assert by_gamma == sorted(by_gamma) and len(set(by_gamma)) == 4


def test_criterion_ordering_of_asymptotic_variance():
    # trace(M^-1 K M^-1) under A <= under L <= under uniform, full-data matrices
    orders = []
    for rep in range(20):
        d = simgen.gen_logistic(simgen.LogisticSimConfig("mzNormal", n=20_000, seed=7, rep=rep))
        beta = simgen.LogisticSimConfig().beta
        m_inv = inverse(m_x(beta, d))
        tr = {c: np.trace(sandwich(m_inv, k_rare_full(beta, d, rare.rare_probs(beta, d, c)))) for c in ("A", "L", "uniform")}
        orders.append(tr["A"] <= tr["L"] * (1 + 1e-12) and tr["L"] <= tr["uniform"])
    assert all(orders)


def test_covariance_matches_replication_spread():
    d = simgen.gen_logistic(simgen.LogisticSimConfig("mzNormal", n=50_000, seed=9))
    pilot = rare.run_pilot(d, rare.default_q0(d), "A", seed=0)
    fits = [rare.fit_subsample(d, pilot.probs_opt, 3000, seed=rep, init=pilot.beta_u) for rep in range(500)]
    empirical = np.trace(np.cov(np.array([f.beta for f in fits]).T))
    # the reported covariance includes the full-data term; the spread around a fixed dataset does not
    predicted = np.mean([np.trace(f.covariance - inverse(m_x(f.beta, d)) / d.n) for f in fits])
    assert abs(predicted / empirical - 1) < 0.15


def test_two_step_beats_uniform_one_step():
    cfg = simgen.LogisticSimConfig("mzNormal", n=50_000, beta0=-6.0, seed=13)
    two, uni = [], []
    for rep in range(100):
        d = simgen.gen_logistic(simgen.LogisticSimConfig(cfg.design, cfg.n, cfg.beta0, cfg.beta_rest, cfg.seed, rep))
        two.append(rare.run_two_step_rare(d, rare.default_q0(d), 10_000, "A", seed=rep)[1].beta)
        uni.append(rare.fit_uniform_rare(d, 10_000, seed=rep).beta)
    assert simgen.rmse(two, cfg.beta) < simgen.rmse(uni, cfg.beta)
