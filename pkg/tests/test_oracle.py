import json

import numpy as np
import pytest

from maxrank.oracle import (
    LimitParams,
    check_pair_consistency,
    estimate_gamma,
    sample_f,
    simulate_psi,
    simulate_psi_block,
)
from maxrank.weights import canonical_pair

G, H = canonical_pair()


def _unit(d=1):
    return LimitParams(np.eye(d), np.zeros((d, d)), np.zeros((d, d, d)), np.zeros(d), np.zeros((d, d)))


def test_params_validation_and_dict():
    with pytest.raises(ValueError):
        LimitParams(np.eye(1), np.zeros((1, 1)), np.zeros((1, 1, 1)), np.zeros(1), -np.eye(1))
    u = LimitParams.random(2, 3, seed=1, rank=1)
    assert np.linalg.matrix_rank(u.alpha) == 1
    assert (u.d, u.q) == (2, 3)
    back = LimitParams.from_dict(json.loads(json.dumps(u.to_dict())))
    for name in ("alpha", "beta", "gamma", "a", "phi"):
        np.testing.assert_array_equal(getattr(back, name), getattr(u, name))
    z = LimitParams.zeros(2, 1)
    assert z.gamma.shape == (2, 1, 1)


def test_shapes_and_block():
    u = LimitParams.random(2, 2, seed=3)
    X, Y = simulate_psi(u, G, 2, 5, substeps=200, seed=4)
    assert X.shape == Y.shape == (5, 2, 2)
    b = simulate_psi_block(u, G, 1, substeps=200, seed=4)
    assert b.vectors.shape == (2, 4)
    assert b.x.shape == b.y.shape == (2, 2)
    with pytest.raises(ValueError):
        simulate_psi(u, G, 3, 5)
    with pytest.raises(ValueError):
        simulate_psi(u, G, 1, 5, substeps=10)


@pytest.mark.parametrize("kappa,w", [(1, G), (2, H)])
def test_x_part_variance(kappa, w):
    X, _ = simulate_psi(_unit(), w, kappa, 20_000, substeps=500, seed=8)
    assert X.var() == pytest.approx(w.moments.psi2, rel=0.04)


def test_noise_term_variance():
    u = LimitParams(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1, 1)), np.zeros(1), np.eye(1))
    for kappa, w in ((1, G), (2, H)):
        _, Y = simulate_psi(u, w, kappa, 20_000, substeps=200, seed=2)
        want = w.moments.psi1 / u.theta**3 / kappa**2
        assert Y.var() == pytest.approx(want, rel=0.04)


def test_columns_uncorrelated():
    u = LimitParams.random(2, 2, seed=7)
    X, Y = simulate_psi(u, G, 1, 8000, substeps=200, seed=7)
    c = np.corrcoef(X[:, 0, 0], X[:, 0, 1])[0, 1]
    assert abs(c) < 3 / np.sqrt(8000) * 1.5
    c = np.corrcoef(Y[:, 1, 0], Y[:, 1, 1])[0, 1]
    assert abs(c) < 3 / np.sqrt(8000) * 1.5


def test_rank_deficient_alpha_gives_tiny_values():
    u = LimitParams.random(3, 3, seed=2, rank=1)
    F = sample_f(u, G, 1, 2, 500, substeps=200, seed=1)
    assert np.abs(F).max() <= 1e-20


def test_scaling_with_alpha():
    u = _unit()
    c = 1.7
    v = LimitParams(c * u.alpha, u.beta, u.gamma, u.a, u.phi)
    e1 = estimate_gamma(u, G, 1, 1, 2000, substeps=200, seed=3)
    e2 = estimate_gamma(v, G, 1, 1, 2000, substeps=200, seed=3)
    assert e2.gamma == pytest.approx(c**2 * e1.gamma, rel=1e-10)


def test_full_rank_positive():
    u = LimitParams.random(2, 2, seed=11)
    e = estimate_gamma(u, G, 1, 2, 500, substeps=200, seed=1)
    assert e.gamma > 0 and e.gamma_prime > 0
    assert e.se_gamma > 0 and e.n_draws == 500
    with pytest.raises(ValueError):
        estimate_gamma(u, G, 1, 2, 50)


def test_worker_count_does_not_matter():
    u = LimitParams.random(2, 1, seed=5, rank=1)
    a = sample_f(u, G, 2, 1, 2500, substeps=200, seed=9, workers=1)
    b = sample_f(u, G, 2, 1, 2500, substeps=200, seed=9, workers=2)
    np.testing.assert_array_equal(a, b)


def test_substep_refinement_is_within_noise():
    # without gamma the draws share their normals, so only discretization differs
    u = LimitParams.random(1, 1, seed=13)
    u0 = LimitParams(u.alpha, u.beta, np.zeros_like(u.gamma), u.a, u.phi)
    e1 = estimate_gamma(u0, G, 1, 1, 10_000, substeps=250, seed=4)
    e2 = estimate_gamma(u0, G, 1, 1, 10_000, substeps=500, seed=4)
    assert abs(e1.gamma - e2.gamma) < e1.se_gamma
    # with gamma the paths differ, so compare as independent estimates
    e1 = estimate_gamma(u, G, 1, 1, 10_000, substeps=250, seed=4)
    e2 = estimate_gamma(u, G, 1, 1, 10_000, substeps=500, seed=4)
    assert abs(e1.gamma - e2.gamma) < 3 * np.hypot(e1.se_gamma, e2.se_gamma)


def test_pair_identity_without_noise():
    u = LimitParams.random(2, 1, seed=17, rank=1, noise_scale=0.0)
    res = check_pair_consistency(u, G, H, 1, n_draws=5000, substeps=200, seed=3)
    assert abs(res.z_gamma) <= 4
    assert set(res.to_dict()) == {"g_kappa1", "h_kappa2", "z_gamma", "z_gamma_prime"}
