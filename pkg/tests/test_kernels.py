import numpy as np
import pytest

from tddlink import kernels
from tddlink.config import complex_normal

BACKENDS = ["numpy"] + (["cython"] if kernels._compiled is not None else [])


def naive_moments(x, pred, own, interf, noise_var):
    w = np.array([np.exp(-np.sum(np.abs(x - p) ** 2) / noise_var) for p in pred])
    w /= w.sum()
    return np.sum(w * own), np.sum(w * np.abs(own) ** 2), np.sum(w * interf)


def bank(rng, L=300, tf=2, n=7):
    return (complex_normal(rng, (n, tf)), complex_normal(rng, (L, tf)),
            complex_normal(rng, L), rng.exponential(size=L))


@pytest.mark.parametrize("backend", BACKENDS)
class TestPosteriorMoments:
    def test_matches_naive_loop(self, rng, backend):
        obs, pred, own, interf = bank(rng)
        mean, second, inter = kernels.posterior_moments(obs, pred, own, interf, 0.7, backend=backend)
        for i, x in enumerate(obs):
            m, s, q = naive_moments(x, pred, own, interf, 0.7)
            assert mean[i] == pytest.approx(m, rel=1e-10)
            assert second[i] == pytest.approx(s, rel=1e-10)
            assert inter[i] == pytest.approx(q, rel=1e-10)

    def test_no_pilots_gives_plain_average(self, rng, backend):
        _, _, own, interf = bank(rng)
        mean, second, inter = kernels.posterior_moments(
            np.zeros((3, 0)), np.zeros((len(own), 0)), own, interf, backend=backend)
        np.testing.assert_allclose(mean, own.mean())
        np.testing.assert_allclose(second, np.mean(np.abs(own) ** 2))
        np.testing.assert_allclose(inter, interf.mean())

    def test_far_observation_survives_underflow(self, rng, backend):
        obs, pred, own, interf = bank(rng)
        obs = obs + 1e3  # every raw weight underflows without max-subtraction
        mean, *_ = kernels.posterior_moments(obs, pred, own, interf, backend=backend)
        assert np.all(np.isfinite(mean))

    def test_nan_observation_is_degenerate(self, rng, backend):
        obs, pred, own, interf = bank(rng)
        obs[0, 0] = np.nan
        with pytest.raises(FloatingPointError):
            kernels.posterior_moments(obs, pred, own, interf, backend=backend)


@pytest.mark.skipif(kernels._compiled is None, reason="compiled extension not built")
def test_backends_agree(rng):
    obs, pred, own, interf = bank(rng, L=2000, tf=3, n=50)
    a = kernels.posterior_moments(obs, pred, own, interf, backend="numpy")
    b = kernels.posterior_moments(obs, pred, own, interf, backend="cython")
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-14)


def test_empty_bank_rejected():
    with pytest.raises(FloatingPointError):
        kernels.posterior_moments(np.zeros((1, 1)), np.zeros((0, 1)), np.zeros(0), np.zeros(0))


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        kernels.posterior_moments(np.zeros((1, 2)), np.zeros((4, 1)), np.zeros(4), np.zeros(4))


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.posterior_moments(np.zeros((1, 1)), np.zeros((2, 1)), np.zeros(2), np.zeros(2), backend="fortran")
