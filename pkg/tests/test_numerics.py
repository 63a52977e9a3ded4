import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optsub.errors import NotPositiveDefinite
from optsub.numerics import as_symmetric, as_vector, frobenius_norm, invert_spd, sandwich, solve_spd, weighted_gram


def random_spd(rng, dim):
    a = rng.normal(size=(dim, dim))
    return a @ a.T + dim * np.eye(dim)


def test_solve_identity_and_diagonal():
    np.testing.assert_allclose(solve_spd(np.eye(2), [3.0, 4.0]), [3.0, 4.0])
    np.testing.assert_allclose(solve_spd(np.diag([2.0, 4.0]), [2.0, 4.0]), [1.0, 1.0])


def test_solve_residual_small():
    a = np.array([[4.0, 2.0], [2.0, 3.0]])
    b = np.array([10.0, 8.0])
    assert np.max(np.abs(a @ solve_spd(a, b) - b)) < 1e-10


def test_invert_examples():
    np.testing.assert_allclose(invert_spd(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(invert_spd(np.diag([2.0, 5.0])), np.diag([0.5, 0.2]))
    a = random_spd(np.random.default_rng(0), 4)
    assert np.max(np.abs(a @ invert_spd(a) - np.eye(4))) < 1e-8


def test_frobenius_examples():
    assert frobenius_norm(np.eye(2)) == pytest.approx(math.sqrt(2))
    assert frobenius_norm(np.zeros((3, 3))) == 0.0
    assert frobenius_norm([[1.0, 2.0], [3.0, 4.0]]) == pytest.approx(math.sqrt(30))


def test_rejects_bad_shapes_and_values():
    with pytest.raises(ValueError):
        as_symmetric(np.ones((2, 3)))
    with pytest.raises(ValueError):
        as_symmetric([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        as_vector([1.0, np.nan])
    with pytest.raises(ValueError):
        as_vector(np.ones((2, 2)))


def test_indefinite_raises():
    with pytest.raises(NotPositiveDefinite):
        invert_spd(np.diag([1.0, -1.0]))
    with pytest.raises(NotPositiveDefinite):
        solve_spd(np.zeros((2, 2)), [1.0, 1.0])


def test_ridge_rescues_rank_deficient_pivot():
    # singular by a hair: the one-off ridge makes it factorizable
    a = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-14]])
    inv = invert_spd(a)
    assert np.all(np.isfinite(inv))


def test_sandwich_and_gram():
    rng = np.random.default_rng(1)
    b, m = random_spd(rng, 3), random_spd(rng, 3)
    np.testing.assert_allclose(sandwich(b, m), b @ m @ b, rtol=1e-12)
    x, w = rng.normal(size=(7, 3)), rng.uniform(size=7)
    want = sum(w[i] * np.outer(x[i], x[i]) for i in range(7))
    np.testing.assert_allclose(weighted_gram(x, w), want, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 50), st.integers(0, 2**32 - 1))
def test_solve_recovers_vector(dim, seed):
    rng = np.random.default_rng(seed)
    a = random_spd(rng, dim)
    x = rng.normal(size=dim)
    got = solve_spd(a, a @ x)
    assert np.linalg.norm(got - x) <= 1e-7 * max(np.linalg.norm(x), 1e-300)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_double_inverse(dim, seed):
    a = random_spd(np.random.default_rng(seed), dim)
    back = invert_spd(invert_spd(a))
    assert frobenius_norm(back - a) <= 1e-6 * frobenius_norm(a)


@settings(max_examples=60, deadline=None)
@given(st.floats(-1e6, 1e6, allow_nan=False), st.integers(0, 2**32 - 1))
def test_frobenius_homogeneous(c, seed):
    a = np.random.default_rng(seed).normal(size=(3, 4))
    assert frobenius_norm(c * a) == pytest.approx(abs(c) * frobenius_norm(a), rel=1e-14, abs=1e-300)
