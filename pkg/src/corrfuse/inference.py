"""MCMC inference of Dirichlet marginals and correlation parameters.

All samplers move log-parameters by random-walk Metropolis with per-coordinate
adaptive scales, and run every chain (and, for the correlated model, every
example's latents) as one vectorized state. Point estimates are posterior
means.

Correlated-model latents use the same unconstrained coordinates as
:mod:`corrfuse.fusion`: ``u_k = log T_k`` and ``v_l = logit(w_l)`` with
``D_l = w_l * min_k(xk_l T_k)``. Given the latents the target factorizes over
output coordinates, so each parameter vector is updated coordinatewise in a
single vectorized step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln, polygamma

from .core import CfmParams, IfmParams, LabeledDataset, ValidationError, clamp_normalize
from .density import COUPLED_ATOL
from .fusion import _coord_terms
from .mcmc import McmcConfig, PosteriorSummary, StepAdapter, effective_sample_size, split_rhat
from .sampling import make_rng

MIN_CLASS_WARN = 10
NOISE_CHUNK = 512
CARRY_V = 4.0
# lower end of the delta box; below it the likelihood is indistinguishable from independence
DELTA_FLOOR = 1e-6
LOG_DELTA_FLOOR = float(np.log(DELTA_FLOOR))


class InferenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class GammaPrior:
    """Independent ``Gamma(shape, rate)`` prior on every positive parameter.

    The default is the vague ``shape = rate = 1e-3`` prior in the
    shape/rate convention used by BUGS-style samplers.
    """

    shape: float = 1e-3
    rate: float = 1e-3

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValidationError("gamma prior shape and rate must be > 0")

    def log_density_logspace(self, theta: np.ndarray) -> np.ndarray:
        """Log prior density of ``theta = log(param)``, Jacobian included."""
        return self.shape * theta - self.rate * np.exp(theta)

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def var(self) -> float:
        return self.shape / self.rate**2


# ---------------------------------------------------------------- helpers


def _check_classes(data: LabeledDataset) -> np.ndarray:
    counts = data.class_counts()
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise InferenceError(f"no training examples for class(es) {', '.join(str(j + 1) for j in empty)}")
    small = np.flatnonzero(counts < MIN_CLASS_WARN)
    if small.size:
        warnings.warn(f"class(es) {', '.join(str(j + 1) for j in small)} have fewer than "
                      f"{MIN_CLASS_WARN} examples; estimates will be prior-dominated", stacklevel=3)
    return counts


def _class_prior(counts: np.ndarray) -> np.ndarray:
    # posterior mean under a flat Dirichlet prior on class frequencies
    return (counts + 1.0) / (counts.sum() + counts.size)


def _moment_dirichlet(X: np.ndarray) -> np.ndarray:
    """Method-of-moments Dirichlet fit used to start chains."""
    J = X.shape[1]
    if X.shape[0] < 2:
        return np.ones(J)
    X = X[np.lexsort(X.T[::-1])]
    m = X.mean(axis=0)
    v = X.var(axis=0, ddof=1)
    ok = v > 0
    if not ok.any():
        return np.maximum(m * 100.0, 1e-2)
    s = np.median(m[ok] * (1 - m[ok]) / v[ok] - 1.0)
    s = float(np.clip(s, 0.05, 1e4))
    return np.maximum(m * s, 1e-3)


class _BlockNoise:
    """Per-block random streams consumed in fixed-size chunks.

    Each block owns its generator, so a block's trajectory does not depend on
    which other blocks are sampled alongside it.
    """

    def __init__(self, rngs: list, shape_normal: tuple, shape_uniform: tuple):
        self.rngs = rngs
        self.sn, self.su = shape_normal, shape_uniform
        self.pos = NOISE_CHUNK

    def next(self):
        if self.pos == NOISE_CHUNK:
            self.normal = np.stack([r.standard_normal((NOISE_CHUNK, *self.sn)) for r in self.rngs], axis=1)
            self.uniform = np.stack([np.log(r.random((NOISE_CHUNK, *self.su))) for r in self.rngs], axis=1)
            self.pos = 0
        i = self.pos
        self.pos += 1
        return self.normal[i], self.uniform[i]


def _summaries(draws: np.ndarray):
    """Mean, sd, split-R-hat and ESS over ``(n_keep, chains, ...)`` draws."""
    flat = draws.reshape(-1, *draws.shape[2:])
    return flat.mean(axis=0), flat.std(axis=0, ddof=1), split_rhat(draws), effective_sample_size(draws)


# ---------------------------------------------------------------- IFM


@dataclass(frozen=True)
class DirichletBlock:
    """Sufficient statistics of one Dirichlet: count and summed log-outputs."""

    key: tuple
    n: int
    sum_log: np.ndarray

    @classmethod
    def from_outputs(cls, key, X: np.ndarray) -> "DirichletBlock":
        X = clamp_normalize(np.asarray(X, dtype=float))
        # exactly rounded sums, so the statistics do not depend on row order
        return cls(key, X.shape[0], np.array([math.fsum(col) for col in np.log(X).T]))


def _ifm_target(theta, n, S, prior: GammaPrior):
    a = np.exp(theta)
    return (n * (gammaln(a.sum(axis=-1)) - gammaln(a).sum(axis=-1))
            + ((a - 1.0) * S).sum(axis=-1) + prior.log_density_logspace(theta).sum(axis=-1))


def fit_dirichlet_blocks(blocks: list[DirichletBlock], prior: GammaPrior, mcmc: McmcConfig,
                         init: np.ndarray | None = None) -> dict:
    """Sample the posterior of independent Dirichlet parameter vectors.

    Every block's stream is ``make_rng(mcmc.seed, "dirichlet", *block.key)``,
    so fitting blocks together or one at a time gives identical draws.
    Returns a dict of ``(B, J)`` arrays: ``mean``, ``sd``, ``rhat``, ``ess``,
    ``acceptance``.
    """
    B, J, C = len(blocks), blocks[0].sum_log.size, mcmc.n_chains
    n = np.array([b.n for b in blocks], dtype=float)[:, None]
    S = np.stack([b.sum_log for b in blocks])[:, None, :]
    rngs = [make_rng(mcmc.seed, "dirichlet", *b.key) for b in blocks]

    start = np.log(init) if init is not None else np.zeros((B, J))
    jitter = np.stack([r.normal(0.0, 0.2, (C, J)) for r in rngs])
    jitter[:, 0] = 0.0
    theta = start[:, None, :] + jitter
    cur = _ifm_target(theta, n, S, prior)

    coord = [StepAdapter((B, C), 0.3, mcmc.adapt_window) for _ in range(J)]
    scale_move = StepAdapter((B, C), 0.1, mcmc.adapt_window)
    noise = _BlockNoise(rngs, (C, J + 1), (C, J + 1))
    draws = np.empty((mcmc.n_keep, C, B, J))
    kept = 0
    for it in range(mcmc.n_iter):
        adapting = it < mcmc.n_burnin
        z, lu = noise.next()
        for l in range(J):
            prop = theta.copy()
            prop[..., l] += coord[l].scale * z[..., l]
            new = _ifm_target(prop, n, S, prior)
            ok = lu[..., l] < new - cur
            theta = np.where(ok[..., None], prop, theta)
            cur = np.where(ok, new, cur)
            coord[l].record(ok, adapting)
        # common rescaling of the whole vector (moves along the precision ridge)
        prop = theta + (scale_move.scale * z[..., J])[..., None]
        new = _ifm_target(prop, n, S, prior)
        ok = lu[..., J] < new - cur
        theta = np.where(ok[..., None], prop, theta)
        cur = np.where(ok, new, cur)
        scale_move.record(ok, adapting)
        if it >= mcmc.n_burnin and (it - mcmc.n_burnin) % mcmc.thin == 0:
            draws[kept] = np.exp(theta).transpose(1, 0, 2)
            kept += 1
    mean, sd, rhat, ess = _summaries(draws)
    return {"mean": mean, "sd": sd, "rhat": rhat, "ess": ess,
            "acceptance": {"coordinate": float(np.mean([c.acceptance_rate().mean() for c in coord])),
                           "scale": float(scale_move.acceptance_rate().mean())}}


def fit_ifm(data: LabeledDataset, prior: GammaPrior | None = None,
            mcmc: McmcConfig | None = None) -> PosteriorSummary:
    """Posterior of every ``alpha_j^k`` given labelled outputs.

    Classes and classifiers decouple, so each ``(j, k)`` block is an
    independent Dirichlet posterior.
    """
    prior = prior or GammaPrior()
    mcmc = mcmc or McmcConfig.for_fitting()
    counts = _check_classes(data)
    K, J = data.K, data.J
    blocks, init = [], []
    for k in range(K):
        for j in range(J):
            X = data.outputs[data.labels == j + 1, k]
            blocks.append(DirichletBlock.from_outputs((k, j), X))
            init.append(_moment_dirichlet(X))
    res = fit_dirichlet_blocks(blocks, prior, mcmc, np.array(init))
    shape = (K, J, J)
    point = IfmParams(res["mean"].reshape(shape), _class_prior(counts))
    return PosteriorSummary(
        point=point,
        sd={"alpha": res["sd"].reshape(shape)},
        rhat={"alpha": res["rhat"].reshape(shape)},
        ess={"alpha": res["ess"].reshape(shape)},
        acceptance={"alpha": res["acceptance"]},
        config=mcmc,
        extra={"class_counts": counts.tolist(), "prior": {"shape": prior.shape, "rate": prior.rate}},
    )


def sample_prior_only(J: int, prior: GammaPrior, mcmc: McmcConfig) -> dict:
    """Run the Dirichlet sampler with no data (a diagnostic of the sampler itself)."""
    block = DirichletBlock(("prior",), 0, np.zeros(J))
    init = np.full((1, J), prior.mean)
    res = fit_dirichlet_blocks([block], prior, mcmc, init)
    return {k: (v[0] if isinstance(v, np.ndarray) else v) for k, v in res.items()}


# ---------------------------------------------------------------- CFM


def _canonical(X: np.ndarray) -> np.ndarray:
    """Rows in lexicographic order, so example order cannot affect the chains."""
    flat = X.reshape(X.shape[0], -1)
    return X[np.lexsort(flat.T[::-1])]


def _pairs_identical(X: np.ndarray) -> bool:
    return bool(np.all(np.abs(X[:, 0] - X[:, 1]) <= COUPLED_ATOL))


class _CfmClassSampler:
    """One class's correlated-model posterior: ``C`` chains x ``n`` examples.

    With ``fit_alpha`` false the marginals stay at ``a1_fixed``/``a2_fixed``
    and only ``delta`` and the latents move.
    """

    def __init__(self, X: np.ndarray, alpha1, alpha2, prior: GammaPrior, mcmc: McmcConfig,
                 rng: np.random.Generator, fit_alpha: bool):
        self.lx1 = np.log(X[:, 0])
        self.lx2 = np.log(X[:, 1])
        self.n, self.J = self.lx1.shape
        self.C = mcmc.n_chains
        self.prior, self.mcmc, self.rng, self.fit_alpha = prior, mcmc, rng, fit_alpha
        C, n, J = self.C, self.n, self.J
        a1 = np.broadcast_to(np.asarray(alpha1, dtype=float), (C, J)).copy()
        a2 = np.broadcast_to(np.asarray(alpha2, dtype=float), (C, J)).copy()
        jit = rng.normal(0.0, 0.1, (3, C, J))
        jit[:, 0] = 0.0
        if fit_alpha:
            a1 *= np.exp(jit[0])
            a2 *= np.exp(jit[1])
        self.la1, self.la2 = np.log(a1), np.log(a2)
        self.ld = np.log(0.5 * np.minimum(a1, a2)) + jit[2]
        self.ld = np.minimum(self.ld, np.log(np.minimum(a1, a2)) - 1e-3)
        self.u1 = np.log(a1.sum(axis=1))[:, None] + rng.normal(0.0, 0.1, (C, n))
        self.u2 = np.log(a2.sum(axis=1))[:, None] + rng.normal(0.0, 0.1, (C, n))
        self.v = rng.normal(0.0, 0.5, (C, n, J))
        self._refresh_params()
        self.cur = self._terms(self.u1, self.u2, self.v, self.pp)
        if not np.all(np.isfinite(self.cur.sum(axis=(1, 2)))):
            raise InferenceError("could not find a feasible initial latent state")

    def _params(self, ld, la1, la2):
        d, a1, a2 = np.exp(ld), np.exp(la1), np.exp(la2)
        p1, p2 = a1 - d, a2 - d
        with np.errstate(invalid="ignore"):
            return (d[:, None], p1[:, None], p2[:, None],
                    gammaln(d)[:, None], gammaln(p1)[:, None], gammaln(p2)[:, None])

    def _refresh_params(self):
        self.pp = self._params(self.ld, self.la1, self.la2)

    def _terms(self, u1, u2, v, pp):
        d, a1, a2, lg_d, lg_a1, lg_a2 = pp
        return _coord_terms(self.lx1, self.lx2, u1, u2, v, True, d, a1, a2, lg_d, lg_a1, lg_a2)

    def _param_prior(self, ld, la1, la2):
        lp = self.prior.log_density_logspace(ld)
        if self.fit_alpha:
            lp = lp + self.prior.log_density_logspace(la1) + self.prior.log_density_logspace(la2)
        return lp  # (C, J)

    @staticmethod
    def _in_box(ld, la1, la2):
        return (ld < np.minimum(la1, la2)) & (ld > LOG_DELTA_FLOOR)

    def run(self):
        mcmc, rng = self.mcmc, self.rng
        C, n, J = self.C, self.n, self.J
        w = mcmc.adapt_window
        ad_v = StepAdapter((C, n, J), 1.0, w)
        ad_u1, ad_u2, ad_uu = (StepAdapter((C, n), 0.2, w) for _ in range(3))
        ad_par = {name: StepAdapter((C, J), 0.1, w) for name in ("delta", "delta_v", "delta_pow", "alpha1", "alpha2")}
        ad_scale = StepAdapter(C, 0.02, w)
        keep_d = np.empty((mcmc.n_keep, C, J))
        keep_a = np.empty((mcmc.n_keep, C, 2, J)) if self.fit_alpha else None
        kept = 0

        def latent_u(u1n, u2n, adapter, adapting):
            new = self._terms(u1n, u2n, self.v, self.pp)
            lr = (new - self.cur).sum(axis=2) + J * ((u1n - self.u1) + (u2n - self.u2))
            ok = np.log(rng.random((C, n))) < lr
            self.cur = np.where(ok[..., None], new, self.cur)
            self.u1 = np.where(ok, u1n, self.u1)
            self.u2 = np.where(ok, u2n, self.u2)
            adapter.record(ok, adapting)

        def param_step(which, adapter, adapting, carry_v=0.0):
            ld, la1, la2 = self.ld, self.la1, self.la2
            step = adapter.scale * rng.standard_normal((C, J))
            if which == "delta":
                ld = ld + step
            elif which == "alpha1":
                la1 = la1 + step
            else:
                la2 = la2 + step
            # the joint move drags every example's shared-component logit along with delta
            v = self.v + carry_v * step[:, None, :] if carry_v else self.v
            inside = self._in_box(ld, la1, la2)
            pp = self._params(ld, la1, la2)
            new = self._terms(self.u1, self.u2, v, pp)
            lr = ((new - self.cur).sum(axis=1)
                  + self._param_prior(ld, la1, la2) - self._param_prior(self.ld, self.la1, self.la2))
            lr = np.where(inside & np.isfinite(lr), lr, -np.inf)
            ok = np.log(rng.random((C, J))) < lr
            self.ld = np.where(ok, ld, self.ld)
            self.la1 = np.where(ok, la1, self.la1)
            self.la2 = np.where(ok, la2, self.la2)
            self.cur = np.where(ok[:, None, :], new, self.cur)
            if carry_v:
                self.v = np.where(ok[:, None, :], v, self.v)
            self._refresh_params()
            adapter.record(ok, adapting)

        def power_step(adapter, adapting):
            # move delta and carry every D to the same standardized position of log D under
            # Gamma(delta); crosses the near-flat region delta -> 0 where plain moves stall
            step = adapter.scale * rng.standard_normal((C, J))
            ld = self.ld + step
            d_old, d_new = np.exp(self.ld), np.exp(ld)
            log_slope = 0.5 * (np.log(polygamma(1, d_new)) - np.log(polygamma(1, d_old)))
            lm = np.minimum(self.lx1 + self.u1[..., None], self.lx2 + self.u2[..., None])
            log_w = -np.logaddexp(0.0, -self.v)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                lD_new = (digamma(d_new)[:, None, :]
                          + np.exp(log_slope)[:, None, :] * (log_w + lm - digamma(d_old)[:, None, :]))
                log_w_new = lD_new - lm
                feasible = np.all(log_w_new < 0, axis=1)
                log_w_new = np.where(log_w_new < 0, log_w_new, log_w)
                log1m_new = np.log1p(-np.exp(log_w_new))
                v = log_w_new - log1m_new
                jac = log_slope[:, None, :] - np.logaddexp(0.0, self.v) - log1m_new
            pp = self._params(ld, self.la1, self.la2)
            new = self._terms(self.u1, self.u2, v, pp)
            lr = ((new - self.cur + jac).sum(axis=1)
                  + self._param_prior(ld, self.la1, self.la2) - self._param_prior(self.ld, self.la1, self.la2))
            ok_rows = feasible & self._in_box(ld, self.la1, self.la2)
            lr = np.where(ok_rows & np.isfinite(lr), lr, -np.inf)
            ok = np.log(rng.random((C, J))) < lr
            self.ld = np.where(ok, ld, self.ld)
            self.v = np.where(ok[:, None, :], v, self.v)
            self.cur = np.where(ok[:, None, :], new, self.cur)
            self._refresh_params()
            adapter.record(ok, adapting)

        def scale_step(adapting):
            # rescale parameters and totals together; D scales with the totals automatically
            s = ad_scale.scale * rng.standard_normal(C)
            ld, la1, la2 = self.ld + s[:, None], self.la1 + s[:, None], self.la2 + s[:, None]
            u1, u2 = self.u1 + s[:, None], self.u2 + s[:, None]
            pp = self._params(ld, la1, la2)
            new = self._terms(u1, u2, self.v, pp)
            lr = ((new - self.cur).sum(axis=(1, 2)) + 2 * J * n * s
                  + (self._param_prior(ld, la1, la2) - self._param_prior(self.ld, self.la1, self.la2)).sum(axis=1))
            ok = np.log(rng.random(C)) < np.where(np.isfinite(lr), lr, -np.inf)
            self.ld = np.where(ok[:, None], ld, self.ld)
            self.la1 = np.where(ok[:, None], la1, self.la1)
            self.la2 = np.where(ok[:, None], la2, self.la2)
            self.u1 = np.where(ok[:, None], u1, self.u1)
            self.u2 = np.where(ok[:, None], u2, self.u2)
            self.cur = np.where(ok[:, None, None], new, self.cur)
            self._refresh_params()
            ad_scale.record(ok, adapting)

        for it in range(mcmc.n_iter):
            adapting = it < mcmc.n_burnin
            vn = self.v + ad_v.scale * rng.standard_normal((C, n, J))
            new = self._terms(self.u1, self.u2, vn, self.pp)
            ok = np.log(rng.random((C, n, J))) < new - self.cur
            self.cur = np.where(ok, new, self.cur)
            self.v = np.where(ok, vn, self.v)
            ad_v.record(ok, adapting)
            latent_u(self.u1 + ad_u1.scale * rng.standard_normal((C, n)), self.u2, ad_u1, adapting)
            latent_u(self.u1, self.u2 + ad_u2.scale * rng.standard_normal((C, n)), ad_u2, adapting)
            sh = ad_uu.scale * rng.standard_normal((C, n))
            latent_u(self.u1 + sh, self.u2 + sh, ad_uu, adapting)

            param_step("delta", ad_par["delta"], adapting)
            param_step("delta", ad_par["delta_v"], adapting, carry_v=CARRY_V)
            power_step(ad_par["delta_pow"], adapting)
            if self.fit_alpha:
                param_step("alpha1", ad_par["alpha1"], adapting)
                param_step("alpha2", ad_par["alpha2"], adapting)
                scale_step(adapting)

            if it >= mcmc.n_burnin and (it - mcmc.n_burnin) % mcmc.thin == 0:
                keep_d[kept] = np.exp(self.ld)
                if self.fit_alpha:
                    keep_a[kept, :, 0] = np.exp(self.la1)
                    keep_a[kept, :, 1] = np.exp(self.la2)
                kept += 1

        acc = {"shared": float(ad_v.acceptance_rate().mean()),
               "totals": float(np.mean([a.acceptance_rate().mean() for a in (ad_u1, ad_u2, ad_uu)])),
               "delta": float(ad_par["delta"].acceptance_rate().mean())}
        if self.fit_alpha:
            acc["alpha"] = float(np.mean([ad_par[k].acceptance_rate().mean() for k in ("alpha1", "alpha2")]))
            acc["scale"] = float(ad_scale.acceptance_rate().mean())
        return keep_d, keep_a, acc


def _fit_cfm(data: LabeledDataset, alpha0: np.ndarray, prior: GammaPrior, mcmc: McmcConfig,
             fit_alpha: bool, tag: str):
    if data.K != 2:
        raise ValidationError("the correlated model is defined for K = 2 classifiers")
    counts = _check_classes(data)
    J = data.J
    alpha = np.array(alpha0, dtype=float)
    delta = np.zeros((J, J))
    sd = {"delta": np.zeros((J, J))}
    rhat = {"delta": np.ones((J, J))}
    ess = {"delta": np.full((J, J), np.nan)}
    if fit_alpha:
        sd["alpha"], rhat["alpha"], ess["alpha"] = np.zeros((2, J, J)), np.ones((2, J, J)), np.full((2, J, J), np.nan)
    acceptance, coupled = {}, []
    for j in range(J):
        X = _canonical(data.outputs[data.labels == j + 1])
        if _pairs_identical(X):
            # identical pairs only arise from the fully coupled limit: pool both marginals
            coupled.append(j + 1)
            if fit_alpha:
                blk = DirichletBlock.from_outputs(("cfm-coupled", j), X[:, 0])
                res = fit_dirichlet_blocks([blk], prior, mcmc, _moment_dirichlet(X[:, 0])[None])
                row = res["mean"][0]
                sd["alpha"][:, j] = res["sd"][0]
                rhat["alpha"][:, j] = res["rhat"][0]
                ess["alpha"][:, j] = res["ess"][0]
            else:
                row = 0.5 * (alpha[0, j] + alpha[1, j])
            alpha[:, j] = row
            delta[j] = row
            continue
        sampler = _CfmClassSampler(X, alpha[0, j], alpha[1, j], prior, mcmc,
                                   make_rng(mcmc.seed, tag, j), fit_alpha)
        kd, ka, acc = sampler.run()
        acceptance[f"class_{j + 1}"] = acc
        mean, s, r, e = _summaries(kd)
        delta[j], sd["delta"][j], rhat["delta"][j], ess["delta"][j] = mean, s, r, e
        if fit_alpha:
            mean, s, r, e = _summaries(ka)
            alpha[:, j], sd["alpha"][:, j], rhat["alpha"][:, j], ess["alpha"][:, j] = mean, s, r, e
    # posterior means of delta already lie in the box up to the draws' own bound
    delta = np.clip(delta, 0.0, alpha.min(axis=0))
    point = CfmParams(IfmParams(alpha, _class_prior(counts)), delta)
    extra = {"class_counts": counts.tolist(), "coupled_classes": coupled,
             "prior": {"shape": prior.shape, "rate": prior.rate}}
    return PosteriorSummary(point, sd, rhat, ess, acceptance, mcmc, extra)


def fit_cfm_stepwise(data: LabeledDataset, alpha_hat: IfmParams, prior: GammaPrior | None = None,
                     mcmc: McmcConfig | None = None) -> PosteriorSummary:
    """Correlation parameters with the marginals held at ``alpha_hat``."""
    if alpha_hat.K != 2 or alpha_hat.J != data.J:
        raise ValidationError("alpha_hat must hold K = 2 classifiers with the data's J")
    return _fit_cfm(data, alpha_hat.alpha, prior or GammaPrior(), mcmc or McmcConfig.for_fitting(),
                    False, "cfm-stepwise")


def fit_cfm_joint(data: LabeledDataset, prior: GammaPrior | None = None,
                  mcmc: McmcConfig | None = None) -> PosteriorSummary:
    """Marginals and correlation parameters sampled jointly."""
    if data.K != 2:
        raise ValidationError("the correlated model is defined for K = 2 classifiers")
    _check_classes(data)
    init = np.stack([
        np.stack([_moment_dirichlet(data.outputs[data.labels == j + 1, k]) for j in range(data.J)])
        for k in range(2)
    ])
    return _fit_cfm(data, init, prior or GammaPrior(), mcmc or McmcConfig.for_fitting(), True, "cfm-joint")


__all__ = [
    "GammaPrior", "InferenceError", "DirichletBlock", "fit_dirichlet_blocks", "fit_ifm",
    "sample_prior_only", "fit_cfm_stepwise", "fit_cfm_joint",
]
