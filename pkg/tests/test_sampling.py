import numpy as np
import pytest
from scipy import stats

from corrfuse import (
    CorrelatedPair, ValidationError, make_rng, sample_class, sample_correlated_dirichlet, sample_dirichlet,
    sample_gamma,
)
from corrfuse.calibration import pearson_columns
from corrfuse.sampling import correlated_dirichlet_rvs, derive_seed, dirichlet_rvs

N = 1_000_000


def dirichlet_moments(alpha):
    a = np.asarray(alpha, dtype=float)
    a0 = a.sum()
    mean = a / a0
    var = a * (a0 - a) / (a0**2 * (a0 + 1))
    return mean, var


def within_se(sample, mean, var, k=4.0):
    """Sample mean and variance within ``k`` standard errors of the targets."""
    n = sample.shape[0]
    se_mean = np.sqrt(var / n)
    # variance of the sample variance: (mu4 - var^2) / n, with mu4 estimated
    mu4 = ((sample - sample.mean(axis=0)) ** 4).mean(axis=0)
    se_var = np.sqrt(np.maximum(mu4 - var**2, 0) / n)
    ok_mean = np.abs(sample.mean(axis=0) - mean) <= k * se_mean
    ok_var = np.abs(sample.var(axis=0) - var) <= k * se_var
    return bool(np.all(ok_mean) and np.all(ok_var))


class TestGamma:
    def test_shape_zero_is_exactly_zero(self, rng):
        assert sample_gamma(rng, 0.0, 2.5) == 0.0
        assert np.all(sample_gamma(rng, 0.0, size=100) == 0.0)

    def test_shape_three_moments(self, rng):
        y = sample_gamma(rng, 3.0, 1.0, size=N)
        assert y.mean() == pytest.approx(3.0, abs=0.01)
        assert y.var() == pytest.approx(3.0, abs=0.05)

    @pytest.mark.parametrize("shape", [0.05, 0.5, 3.0])
    def test_small_shape_moments(self, rng, shape):
        y = sample_gamma(rng, shape, size=N)[:, None]
        assert within_se(y, shape, shape)

    @pytest.mark.parametrize("shape", [0.05, 0.5])
    def test_small_shape_distribution(self, rng, shape):
        y = sample_gamma(rng, shape, size=200_000)
        assert stats.kstest(y, stats.gamma(shape).cdf).pvalue > 1e-4

    @pytest.mark.parametrize("shape,scale", [(-1.0, 1.0), (1.0, 0.0), (np.nan, 1.0), (1.0, -2.0)])
    def test_invalid(self, rng, shape, scale):
        with pytest.raises(ValidationError):
            sample_gamma(rng, shape, scale)


class TestDirichlet:
    def test_mean_322(self, rng):
        x = dirichlet_rvs(rng, [3, 2, 2], N)
        np.testing.assert_allclose(x.mean(axis=0), [3 / 7, 2 / 7, 2 / 7], atol=0.005)

    def test_mean_uniform(self, rng):
        np.testing.assert_allclose(dirichlet_rvs(rng, [1, 1, 1], N).mean(axis=0), 1 / 3, atol=0.005)

    def test_variance_322(self, rng):
        x = dirichlet_rvs(rng, [3, 2, 2], N)
        assert x[:, 0].var() == pytest.approx(12 / 392, abs=0.002)

    def test_single_draw_is_simplex(self, rng):
        s = sample_dirichlet(rng, [0.1, 0.1, 0.1])
        assert s.J == 3 and s.probs.min() >= 1e-9

    @pytest.mark.parametrize("alpha", [[1.0, 0.0], [1.0, -1.0], [2.0], [np.inf, 1.0]])
    def test_invalid(self, rng, alpha):
        with pytest.raises(ValidationError):
            sample_dirichlet(rng, alpha)


class TestCorrelatedDirichlet:
    def test_independent_when_delta_zero(self, rng):
        x1, x2 = correlated_dirichlet_rvs(rng, [3, 2, 2], [2, 3, 2], [0, 0, 0], N)
        np.testing.assert_allclose(pearson_columns(x1, x2), 0.0, atol=0.005)

    def test_identical_when_fully_coupled(self, rng):
        x1, x2 = correlated_dirichlet_rvs(rng, [3, 2, 2], [3, 2, 2], [3, 2, 2], 10_000)
        assert np.array_equal(x1, x2)

    def test_marginal_mean(self, rng):
        x1, x2 = correlated_dirichlet_rvs(rng, [3, 2, 2], [3, 2, 2], [1.5, 1, 1], N)
        np.testing.assert_allclose(x1.mean(axis=0), [3 / 7, 2 / 7, 2 / 7], atol=0.005)

    def test_marginals_random_parameters(self):
        # the marginality invariant on a few random settings (the full sweep is an acceptance check)
        for case in range(3):
            r = make_rng(5, "marg", case)
            a1, a2 = r.uniform(0.3, 5, 3), r.uniform(0.3, 5, 3)
            d = r.uniform(0, 1, 3) * np.minimum(a1, a2)
            x1, x2 = correlated_dirichlet_rvs(r, a1, a2, d, 400_000)
            assert within_se(x1, *dirichlet_moments(a1))
            assert within_se(x2, *dirichlet_moments(a2))

    def test_monotone_coupling(self, rng):
        a = np.array([3.0, 2.0, 2.0])
        prev = -np.inf
        for c in np.linspace(0, 1, 6):
            x1, x2 = correlated_dirichlet_rvs(make_rng(3), a, a, c * a, 200_000)
            r = pearson_columns(x1, x2)
            assert np.all(r >= prev - 0.01)
            prev = r

    def test_pair_type(self, rng):
        pair = sample_correlated_dirichlet(rng, [3, 2, 2], [3, 2, 2], [1, 1, 1])
        assert isinstance(pair, CorrelatedPair) and pair.J == 3

    @pytest.mark.parametrize("a1,a2,d", [
        ([3, 2, 2], [3, 2, 2], [3.1, 0, 0]),
        ([3, 2, 2], [3, 2], [0, 0, 0]),
        ([3, 2, 2], [3, 2, 2], [-0.1, 0, 0]),
        ([3, 0, 2], [3, 2, 2], [0, 0, 0]),
    ])
    def test_invalid(self, rng, a1, a2, d):
        with pytest.raises(ValidationError):
            sample_correlated_dirichlet(rng, a1, a2, d)


class TestClass:
    def test_degenerate(self, rng):
        assert np.all(sample_class(rng, [1, 0, 0], size=10_000) == 1)

    def test_uniform_frequencies(self, rng):
        t = sample_class(rng, [1 / 3] * 3, size=N)
        np.testing.assert_allclose(np.bincount(t, minlength=4)[1:] / N, 1 / 3, atol=0.002)

    def test_frequency(self, rng):
        t = sample_class(rng, [0.6, 0.2, 0.2], size=N)
        assert np.mean(t == 1) == pytest.approx(0.6, abs=0.002)

    def test_scalar(self, rng):
        assert sample_class(rng, [0.5, 0.5]) in (1, 2)


class TestStreams:
    def test_same_seed_same_stream(self):
        a = correlated_dirichlet_rvs(make_rng(7, "set", 3), [3, 2, 2], [2, 3, 2], [1, 1, 1], 100)
        b = correlated_dirichlet_rvs(make_rng(7, "set", 3), [3, 2, 2], [2, 3, 2], [1, 1, 1], 100)
        assert all(np.array_equal(u, v) for u, v in zip(a, b))

    def test_task_ids_give_distinct_streams(self):
        draws = {make_rng(7, "chain", c).random() for c in range(16)}
        assert len(draws) == 16
        assert make_rng(7, "a").random() != make_rng(7, "b").random()
        assert make_rng(7).random() != make_rng(8).random()

    def test_derive_seed(self):
        assert derive_seed(1, "x") == derive_seed(1, "x") != derive_seed(1, "y")
