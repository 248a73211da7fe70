import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from corrfuse import (
    AugmentedLatents, CorrelatedPair, EstimationError, ValidationError, estimate_log_likelihood,
    log_augmented_joint, log_dirichlet_pdf, log_gamma_pdf, log_likelihood_quadrature, make_rng, make_simplex,
)

X1 = np.array([0.6, 0.2, 0.2])
X2 = np.array([0.5, 0.3, 0.2])


def pair(x1=X1, x2=X2):
    return CorrelatedPair(make_simplex(x1), make_simplex(x2))


def independent_loglik(x1, x2, a1, a2):
    return log_dirichlet_pdf(x1, a1) + log_dirichlet_pdf(x2, a2)


class TestGammaPdf:
    def test_exponential(self):
        assert log_gamma_pdf(1.0, 1.0) == pytest.approx(-1.0, abs=1e-14)

    def test_shape_three(self):
        assert log_gamma_pdf(2.0, 3.0) == pytest.approx(math.log(2) - 2, abs=1e-12)

    def test_point_mass(self):
        assert log_gamma_pdf(0.0, 0.0) == 0.0
        assert log_gamma_pdf(0.5, 0.0) == -np.inf

    def test_scale_and_support(self):
        from scipy.stats import gamma
        assert log_gamma_pdf(2.0, 3.0, 2.0) == pytest.approx(gamma.logpdf(2.0, 3.0, scale=2.0), abs=1e-12)
        assert log_gamma_pdf(-1.0, 2.0) == -np.inf

    def test_vectorized(self):
        y = np.array([0.5, 1.0, 4.0])
        np.testing.assert_allclose(log_gamma_pdf(y, 2.5), [log_gamma_pdf(v, 2.5) for v in y])

    @pytest.mark.parametrize("args", [(np.nan, 1.0), (1.0, np.inf), (1.0, -1.0), (1.0, 1.0, 0.0)])
    def test_invalid(self, args):
        with pytest.raises(ValidationError):
            log_gamma_pdf(*args)


class TestDirichletPdf:
    def test_uniform(self, rng):
        for _ in range(5):
            x = rng.dirichlet([1, 1, 1])
            assert log_dirichlet_pdf(x, [1, 1, 1]) == pytest.approx(math.log(2), abs=1e-12)

    def test_value(self):
        assert log_dirichlet_pdf(X1, [3, 2, 2]) == pytest.approx(math.log(360 * 0.0144), abs=1e-12)

    @given(st.permutations([0, 1, 2, 3]))
    def test_permutation(self, perm):
        x = np.array([0.1, 0.2, 0.3, 0.4])
        a = np.array([0.5, 2.0, 3.0, 1.5])
        assert log_dirichlet_pdf(x[perm], a[perm]) == pytest.approx(log_dirichlet_pdf(x, a), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            log_dirichlet_pdf(X1, [1, 1])

    def test_matches_scipy(self, rng):
        from scipy.stats import dirichlet
        for _ in range(10):
            a = rng.uniform(0.2, 6, 4)
            x = rng.dirichlet(np.ones(4))
            assert log_dirichlet_pdf(x, a) == pytest.approx(dirichlet.logpdf(x, a), rel=1e-12)


class TestAugmentedJoint:
    def test_independence_reduction(self):
        a1, a2 = np.array([3.0, 2, 2]), np.array([2.0, 3, 2])
        T = np.array([6.0, 8.0])
        lat = AugmentedLatents(np.zeros(3), T)
        expected = sum(float(np.sum(log_gamma_pdf(x * t, a))) + 2 * math.log(t)
                       for x, t, a in ((X1, T[0], a1), (X2, T[1], a2)))
        assert log_augmented_joint(pair(), lat, a1, a2, np.zeros(3)) == pytest.approx(expected, abs=1e-12)

    def test_support_violation(self):
        lat = AugmentedLatents(np.array([5.0, 0.1, 0.1]), np.array([1.0, 1.0]))
        assert log_augmented_joint(pair(), lat, [3, 2, 2], [3, 2, 2], [1, 1, 1]) == -np.inf
        assert not lat.in_support(pair())

    def test_quadrature_identity(self):
        # at delta = 0 integrating out both totals recovers the product of Dirichlet densities
        for case in range(20):
            r = make_rng(11, "quad-identity", case)
            a1, a2 = r.uniform(0.5, 6, 3), r.uniform(0.5, 6, 3)
            x = pair(r.dirichlet(np.ones(3)), r.dirichlet(np.ones(3)))
            zero = np.zeros(3)

            def f(t1, t2):
                return math.exp(log_augmented_joint(x, AugmentedLatents(zero, np.array([t1, t2])), a1, a2, zero))

            t1s, t2s = a1.sum(), a2.sum()
            i1 = integrate.quad(lambda t: f(t, t2s), 0, np.inf, epsabs=0, epsrel=1e-10, limit=200)[0]
            i2 = integrate.quad(lambda t: f(t1s, t), 0, np.inf, epsabs=0, epsrel=1e-10, limit=200)[0]
            total = i1 * i2 / f(t1s, t2s)
            expected = math.exp(independent_loglik(x.x1.probs, x.x2.probs, a1, a2))
            assert total == pytest.approx(expected, rel=1e-4)

    @given(st.floats(0, 3), st.floats(0.1, 20), st.floats(0.1, 20))
    @settings(max_examples=200)
    def test_finite_exactly_on_support(self, d0, t1, t2):
        lat = AugmentedLatents(np.array([d0, 0.05, 0.05]), np.array([t1, t2]))
        val = log_augmented_joint(pair(), lat, [3, 2, 2], [2, 3, 2], [1, 1, 1])
        strict = np.all(X1 * t1 - lat.d > 0) and np.all(X2 * t2 - lat.d > 0)
        if strict:
            assert np.isfinite(val)
        if not lat.in_support(pair()):
            assert val == -np.inf


class TestEstimator:
    def test_independence_limit(self):
        for case in range(5):
            r = make_rng(3, "indep", case)
            a1, a2 = r.uniform(0.5, 6, 3), r.uniform(0.5, 6, 3)
            x = pair(r.dirichlet(np.ones(3)), r.dirichlet(np.ones(3)))
            exact = independent_loglik(x.x1.probs, x.x2.probs, a1, a2)
            assert estimate_log_likelihood(x, a1, a2, np.zeros(3), 10_000, make_rng(3, "zero", case)) == pytest.approx(exact, abs=0.01)
            tiny = 1e-4 * np.minimum(a1, a2)
            assert estimate_log_likelihood(x, a1, a2, tiny, 10_000, make_rng(3, "tiny", case)) == pytest.approx(exact, abs=0.01)

    def test_coupled_limit(self, rng):
        a = np.array([3.0, 2.0, 2.0])
        same = estimate_log_likelihood(pair(X1, X1), a, a, a, 10, rng)
        diff = estimate_log_likelihood(pair(X1, X2), a, a, a, 10, rng)
        assert same == np.inf and diff == -np.inf

    def test_partial_coupling_rejected(self, rng):
        with pytest.raises(ValidationError):
            estimate_log_likelihood(pair(), [3, 2, 2], [2, 3, 2], [2, 2, 1], 10, rng)

    def test_bad_n_mc(self, rng):
        with pytest.raises(ValidationError):
            estimate_log_likelihood(pair(), [3, 2, 2], [2, 3, 2], [1, 1, 1], 0, rng)

    def test_monte_carlo_rate(self):
        a1, a2, d = np.array([3.0, 2, 2]), np.array([2.0, 3, 2]), np.array([0.6, 0.4, 0.4])
        sds = []
        for n in (100, 400, 1600):
            vals = [estimate_log_likelihood(pair(), a1, a2, d, n, make_rng(9, "rate", n, s)) for s in range(20)]
            sds.append(np.std(vals, ddof=1))
        slope = np.polyfit(np.log10([100, 400, 1600]), np.log10(sds), 1)[0]
        assert -0.75 < slope < -0.3
        assert sds[0] > sds[1] > sds[2]

    def test_permutation_invariance(self):
        a1, a2, d = np.array([3.0, 2, 1.5]), np.array([2.0, 3, 2]), np.array([0.6, 0.4, 0.3])
        perm = [2, 0, 1]
        base = estimate_log_likelihood(pair(), a1, a2, d, 10_000, make_rng(1))
        permuted = estimate_log_likelihood(pair(X1[perm], X2[perm]), a1[perm], a2[perm], d[perm], 10_000, make_rng(2))
        assert permuted == pytest.approx(base, abs=0.03)

    def test_agrees_with_quadrature(self):
        a1, a2 = np.array([3.0, 2, 2]), np.array([2.0, 3, 2])
        d = 0.3 * np.minimum(a1, a2)
        mc = estimate_log_likelihood(pair(), a1, a2, d, 20_000, make_rng(4))
        assert mc == pytest.approx(log_likelihood_quadrature(pair(), a1, a2, d), abs=0.03)


class TestQuadratureOracle:
    def test_independence(self):
        a1, a2 = np.array([3.0, 2, 2]), np.array([2.0, 3, 2])
        exact = independent_loglik(X1, X2, a1, a2)
        assert log_likelihood_quadrature(pair(), a1, a2, np.zeros(3)) == pytest.approx(exact, abs=1e-6)

    def test_grid_refinement_stable(self):
        a1, a2 = np.array([3.0, 2, 2]), np.array([2.0, 3, 2])
        d = 0.6 * np.minimum(a1, a2)
        coarse = log_likelihood_quadrature(pair(), a1, a2, d)
        fine = log_likelihood_quadrature(pair(), a1, a2, d, fine=True)
        assert coarse == pytest.approx(fine, abs=1e-4)

    def test_estimation_error_type(self):
        assert issubclass(EstimationError, RuntimeError)
