import numpy as np
import pytest

from maxrank.models import (
    NOISE_VARIANCE,
    ModelSpec,
    PathDataset,
    PerturbationConfig,
    attach_perturbation,
    grid_steps,
    model_zoo,
    parse_model_label,
    perturbed_series,
    simulate_path,
)

RANKS = {1: [1, 0, 1, 1], 2: [2, 0, 1, 1], 3: [3, 0, 1, 2]}


@pytest.mark.parametrize("d", [1, 2, 3])
def test_zoo_ranks(d):
    for mid, r in enumerate(RANKS[d], 1):
        m = model_zoo(d, mid)
        assert m.true_max_rank == r
        assert m.label == f"d{d}m{mid}"
        vol = m.vol(np.array([0.1, 0.7]))
        assert vol.shape == (2, d, d)
        np.testing.assert_allclose(m.noise_cov, NOISE_VARIANCE * np.eye(d))


def test_label_parsing():
    assert parse_model_label("d2m3").true_max_rank == 1
    with pytest.raises(ValueError):
        parse_model_label("model7")
    with pytest.raises((ValueError, KeyError)):
        model_zoo(4, 1)


def test_declared_rank_is_checked():
    vol = lambda t: np.broadcast_to(np.eye(2), np.atleast_1d(t).shape + (2, 2))
    drift = lambda t: np.zeros(np.atleast_1d(t).shape + (2,))
    with pytest.raises(ValueError):
        ModelSpec(2, 2, drift, vol, np.zeros((2, 2)), true_max_rank=1)
    assert ModelSpec(2, 2, drift, vol, np.zeros((2, 2))).true_max_rank == 2


def test_noise_cov_must_be_psd():
    m = model_zoo(1, 1)
    with pytest.raises(ValueError):
        ModelSpec(1, 1, m.drift, m.vol, -np.eye(1))


def test_perturbation_config():
    with pytest.raises(ValueError):
        PerturbationConfig(np.diag([1.0, 0.0]))
    np.testing.assert_array_equal(PerturbationConfig.scaled_identity(2).sigma_tilde, 2 * np.eye(2))


def test_grid_steps():
    assert grid_steps(1e-5, 1.0) == 100_000
    assert grid_steps(1e-7, 1.0) == 10_000_000
    assert grid_steps(0.3, 1.0) == 3


def test_simulation_is_deterministic_and_streams_disjoint():
    m = model_zoo(2, 1)
    a = simulate_path(m, 1e-3, seed=(4, 2))
    b = simulate_path(m, 1e-3, seed=(4, 2))
    c = simulate_path(m, 1e-3, seed=(4, 3))
    np.testing.assert_array_equal(a.Y, b.Y)
    np.testing.assert_array_equal(a.Xprime, b.Xprime)
    assert not np.allclose(a.Y, c.Y)
    assert a.Y.shape == (2, 1001)
    assert a.X_latent[:, 0].tolist() == [0.0, 0.0]
    # noise, Brownian driver and perturbation are three unrelated sequences
    eps = (a.Y - a.X_latent)[:, 1:].ravel()
    dX = np.diff(a.X_latent).ravel()
    dXp = np.diff(a.Xprime).ravel()
    assert abs(np.corrcoef(eps, dX)[0, 1]) < 0.1
    assert abs(np.corrcoef(dX, dXp)[0, 1]) < 0.1


def test_pure_noise_model_statistics():
    path = simulate_path(model_zoo(1, 2), 1e-5, seed=1)
    np.testing.assert_array_equal(path.X_latent, 0.0)
    assert path.Y.var() == pytest.approx(NOISE_VARIANCE, rel=0.02)
    # sigma_tilde = 2 gives quadratic variation 4 T
    assert np.sum(np.diff(path.Xprime) ** 2) == pytest.approx(4.0, rel=0.02)


def test_model_one_quadratic_variation():
    path = simulate_path(model_zoo(1, 1), 1e-5, seed=2)
    assert np.sum(np.diff(path.X_latent) ** 2) == pytest.approx(1.0, rel=0.02)


def test_csv_and_npz_round_trip(tmp_path):
    path = simulate_path(model_zoo(2, 3), 1e-3, seed=9)
    path.to_csv(tmp_path / "p.csv", with_perturbation=True)
    back = PathDataset.from_csv(tmp_path / "p.csv")
    np.testing.assert_array_equal(back.Y, path.Y)
    np.testing.assert_array_equal(back.Xprime, path.Xprime)
    assert back.delta_n == path.delta_n and back.model_label == "d2m3"

    path.to_csv(tmp_path / "q.csv")
    bare = PathDataset.from_csv(tmp_path / "q.csv")
    assert np.isnan(bare.Xprime).all()
    with pytest.raises(ValueError):
        perturbed_series(bare, 1, 0.01)
    again = attach_perturbation(bare, seed=9)
    np.testing.assert_array_equal(again.Xprime, path.Xprime)

    path.save_npz(tmp_path / "p.npz")
    z = PathDataset.load_npz(tmp_path / "p.npz")
    np.testing.assert_array_equal(z.Y, path.Y)
    np.testing.assert_array_equal(z.X_latent, path.X_latent)
    assert z.seed == (9,)


def test_perturbed_series():
    path = simulate_path(model_zoo(1, 1), 1e-3, seed=0)
    Z2 = perturbed_series(path, 2, 0.01)
    np.testing.assert_allclose(Z2, path.Y + np.sqrt(0.02) * path.Xprime)
    with pytest.raises(ValueError):
        perturbed_series(path, 3, 0.01)
