
import numpy as np
import pytest

from corrfuse import (
    CfmParams, GammaPrior, IfmParams, InferenceError, LabeledDataset, McmcConfig, ValidationError, fit_cfm_joint, fit_cfm_stepwise,
    fit_ifm, make_rng,
)
from corrfuse.fusion import cfm_posteriors, ifm_posteriors
from corrfuse.datagen import sample_cfm_dataset
from corrfuse.inference import DirichletBlock, fit_dirichlet_blocks, sample_prior_only

from conftest import SIM1, tv

FAST = McmcConfig(n_chains=2, n_iter=2000, n_burnin=500, seed=1)


def cfm_data(c, n, seed=0, alpha=SIM1):
    params = CfmParams(IfmParams(np.stack([alpha, alpha])), c * alpha)
    return sample_cfm_dataset(params, n, make_rng(seed, "inference-test"))


class TestGammaPrior:
    def test_moments(self):
        p = GammaPrior(2.0, 0.5)
        assert p.mean == 4.0 and p.var == 8.0

    def test_invalid(self):
        with pytest.raises(ValidationError):
            GammaPrior(0.0, 1.0)

    def test_logspace_density(self):
        from scipy.stats import gamma
        p = GammaPrior(2.5, 1.5)
        th = np.array([-1.0, 0.3, 2.0])
        # density of log(alpha) up to a constant
        ref = gamma.logpdf(np.exp(th), 2.5, scale=1 / 1.5) + th
        np.testing.assert_allclose(p.log_density_logspace(th) - ref, (p.log_density_logspace(th) - ref)[0])


class TestIfm:
    def test_recovery(self):
        fit = fit_ifm(cfm_data(0.0, 3000), mcmc=FAST)
        assert np.max(np.abs(fit.point.alpha / SIM1 - 1)) < 0.10
        assert fit.max_rhat < 1.05 and fit.converged
        np.testing.assert_allclose(fit.point.prior_p, 1 / 3)

    def test_sd_shrinks_with_data(self):
        small = fit_ifm(cfm_data(0.0, 400, seed=1), mcmc=FAST)
        large = fit_ifm(cfm_data(0.0, 1600, seed=1), mcmc=FAST)
        ratio = np.median(small.sd["alpha"] / large.sd["alpha"])
        assert 1.6 < ratio < 2.5

    def test_prior_only_moments(self):
        prior = GammaPrior(2.0, 1.0)
        res = sample_prior_only(3, prior, McmcConfig(n_chains=4, n_iter=20000, n_burnin=2000, seed=3))
        np.testing.assert_allclose(res["mean"], 2.0, rtol=0.1)
        np.testing.assert_allclose(res["sd"], np.sqrt(2.0), rtol=0.15)

    def test_prior_only_vague_runs(self):
        res = sample_prior_only(3, GammaPrior(), McmcConfig(n_chains=2, n_iter=500, n_burnin=100))
        assert np.all(res["mean"] > 0) and np.all(np.isfinite(res["mean"]))

    def test_block_independence(self):
        data = cfm_data(0.0, 200, seed=2)
        blocks = [DirichletBlock.from_outputs((k, j), data.outputs[data.labels == j + 1, k])
                  for k in range(2) for j in range(3)]
        together = fit_dirichlet_blocks(blocks, GammaPrior(), FAST)
        for b, blk in enumerate(blocks):
            alone = fit_dirichlet_blocks([blk], GammaPrior(), FAST)
            assert np.array_equal(alone["mean"][0], together["mean"][b])

    def test_deterministic(self):
        data = cfm_data(0.0, 100, seed=3)
        a, b = fit_ifm(data, mcmc=FAST), fit_ifm(data, mcmc=FAST)
        assert np.array_equal(a.point.alpha, b.point.alpha)

    def test_exchangeable(self):
        data = cfm_data(0.0, 100, seed=4)
        perm = make_rng(0).permutation(data.I)
        shuffled = data.subset(perm)
        assert np.array_equal(fit_ifm(data, mcmc=FAST).point.alpha, fit_ifm(shuffled, mcmc=FAST).point.alpha)

    def test_empty_class(self):
        data = cfm_data(0.0, 20)
        keep = data.labels != 3
        with pytest.raises(InferenceError, match="class"):
            fit_ifm(LabeledDataset(data.outputs[keep], data.labels[keep]), mcmc=FAST)

    def test_small_class_warning(self):
        with pytest.warns(UserWarning, match="fewer than"):
            fit_ifm(cfm_data(0.0, 5), mcmc=McmcConfig(n_chains=2, n_iter=300, n_burnin=100))


class TestCfmStepwise:
    def test_independent_data_fuses_like_ifm(self):
        data = cfm_data(0.0, 1000, seed=5)
        ifm = fit_ifm(data, mcmc=FAST).point
        fit = fit_cfm_stepwise(data, ifm, mcmc=McmcConfig(n_chains=2, n_iter=6000, n_burnin=1500, seed=2))
        assert np.mean(fit.point.delta / SIM1) < 0.05
        probe = cfm_data(0.0, 7, seed=6).outputs
        P, _ = cfm_posteriors(probe[:, 0], probe[:, 1], fit.point)
        Q = ifm_posteriors(probe, ifm)
        assert max(tv(p, q) for p, q in zip(P, Q)) <= 0.03

    def test_full_coupling(self):
        data = cfm_data(1.0, 3000, seed=6)
        ifm = fit_ifm(data, mcmc=FAST).point
        fit = fit_cfm_stepwise(data, ifm, mcmc=FAST)
        np.testing.assert_allclose(fit.point.delta, fit.point.alpha[0], rtol=1e-12)
        np.testing.assert_allclose(fit.point.delta, SIM1, rtol=0.10)
        assert fit.extra["coupled_classes"] == [1, 2, 3]

    def test_exchangeable(self):
        data = cfm_data(0.5, 60, seed=7)
        ifm = IfmParams(np.stack([SIM1, SIM1]))
        mc = McmcConfig(n_chains=2, n_iter=400, n_burnin=100, seed=3)
        a = fit_cfm_stepwise(data, ifm, mcmc=mc).point.delta
        b = fit_cfm_stepwise(data.subset(make_rng(1).permutation(data.I)), ifm, mcmc=mc).point.delta
        assert np.array_equal(a, b)

    def test_dimension_check(self):
        with pytest.raises(ValidationError):
            fit_cfm_stepwise(cfm_data(0.5, 10), IfmParams(np.stack([SIM1])), mcmc=FAST)

    def test_moderate_recovery(self):
        data = cfm_data(0.5, 600, seed=8)
        fit = fit_cfm_stepwise(data, IfmParams(np.stack([SIM1, SIM1])),
                               mcmc=McmcConfig(n_chains=2, n_iter=4000, n_burnin=1000, seed=4))
        assert np.mean(np.abs(fit.point.delta / (0.5 * SIM1) - 1)) < 0.25
        assert np.all(fit.point.delta <= SIM1)


class TestCfmJoint:
    def test_joint_alpha_matches_ifm_when_independent(self):
        data = cfm_data(0.0, 400, seed=10)
        ifm = fit_ifm(data, mcmc=FAST).point
        joint = fit_cfm_joint(data, mcmc=McmcConfig(n_chains=2, n_iter=3000, n_burnin=1000, seed=5))
        assert np.max(np.abs(joint.point.alpha / ifm.alpha - 1)) < 0.10
        assert np.all(joint.point.delta < 0.25 * joint.point.alpha.min(axis=0))

    def test_needs_two_classifiers(self):
        data = cfm_data(0.0, 10)
        with pytest.raises(ValidationError):
            fit_cfm_joint(LabeledDataset(data.outputs[:, :1], data.labels), mcmc=FAST)
