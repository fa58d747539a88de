import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxrank.matperturb import (
    det_poly_coefficients,
    gamma_prime_r,
    gamma_r,
    gamma_r_batch,
    rank_ratio_probe,
)


def _pair(d, seed):
    gen = np.random.default_rng(seed)
    return gen.standard_normal((d, d)), gen.standard_normal((d, d)), gen.standard_normal((d, d))


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_end_coefficients(d):
    A, B, _ = _pair(d, d)
    assert gamma_r(A, B, d) == pytest.approx(np.linalg.det(A))
    assert gamma_r(A, B, 0) == pytest.approx(np.linalg.det(B))
    assert gamma_r(A, B, -1) == 0.0


def test_two_by_two_by_hand():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    B = np.array([[5.0, 6.0], [7.0, 8.0]])
    # one column from A, the other from B, both placements
    by_hand = np.linalg.det([[1, 6], [3, 8]]) + np.linalg.det([[5, 2], [7, 4]])
    assert gamma_r(A, B, 1) == pytest.approx(by_hand)


@settings(max_examples=60, deadline=None)
@given(d=st.integers(1, 5), seed=st.integers(0, 10**6))
def test_polynomial_identity(d, seed):
    A, B, _ = _pair(d, seed)
    coef = det_poly_coefficients(A, B)
    for lam in (-1.7, 0.3, 2.2):
        assert np.polyval(coef, lam) == pytest.approx(np.linalg.det(A + lam * B), rel=1e-9, abs=1e-9)


def test_rank_deficient_coefficients_vanish():
    gen = np.random.default_rng(3)
    A = gen.standard_normal((4, 2)) @ gen.standard_normal((2, 4))
    B = gen.standard_normal((4, 4))
    assert abs(gamma_r(A, B, 3)) < 1e-12
    assert abs(gamma_r(A, B, 4)) < 1e-12
    assert abs(gamma_r(A, B, 2)) > 1e-3


def test_batch_matches_scalar():
    gen = np.random.default_rng(5)
    A = gen.standard_normal((7, 3, 3))
    B = gen.standard_normal((7, 3, 3))
    for r in range(-1, 4):
        got = gamma_r_batch(A, B, r)
        want = [gamma_r(a, b, r) for a, b in zip(A, B)]
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("d,r", [(2, 0), (3, 1), (3, 2), (4, 2)])
def test_gamma_prime_is_directional_derivative(d, r):
    A, B, C = _pair(d, 10 * d + r)
    eps = 1e-5
    fd = (gamma_r(A, B + eps * C, r) - gamma_r(A, B - eps * C, r)) / (2 * eps)
    assert gamma_prime_r(A, B, C, r) == pytest.approx(fd, rel=1e-7)
    assert gamma_prime_r(A, B, C, d) == 0.0


def test_input_validation():
    with pytest.raises(ValueError):
        gamma_r(np.eye(2), np.eye(3), 1)
    with pytest.raises(ValueError):
        gamma_r(np.ones((2, 3)), np.ones((2, 3)), 1)
    with pytest.raises(ValueError):
        gamma_r(np.eye(2), np.eye(2), 3)
    with pytest.raises(ValueError):
        gamma_r(np.array([[np.inf]]), np.eye(1), 1)
    with pytest.raises(ValueError):
        rank_ratio_probe(np.eye(2), 1, 0.0, 1)


def test_probe_limits():
    A = np.diag([1.0, 1.0, 0.0])
    vals = [rank_ratio_probe(A, 2, 1e-6, s) for s in range(20)]
    np.testing.assert_allclose(vals, 2.0, atol=1e-3)
    assert rank_ratio_probe(np.zeros((2, 2)), 0, 1e-3, 4) == pytest.approx(4.0)
    assert rank_ratio_probe(A, 2, 1e-3, 9) == rank_ratio_probe(A, 2, 1e-3, 9)
