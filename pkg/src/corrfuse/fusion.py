"""Fusion rules: independent opinion pool, independent and correlated fusion models.

All batch functions take arrays shaped ``(N, K, J)`` (or ``(N, J)`` per
classifier) and return ``(N, J)`` posteriors; the single-example wrappers
return :class:`FusionResult`.

Correlated fusion samples ``(t, D, T1, T2)`` per example. Latents are
moved in unconstrained coordinates ``u_k = log T_k`` and
``v_l = logit(w_l)`` with ``D_l = w_l * min_k(xk_l * T_k)``, so every state
satisfies ``xk_l T_k - D_l >= 0`` and the class update never meets an
infeasible point. The class is redrawn from its exact full conditional, and
the reported posterior averages those conditionals (Rao-Blackwellized);
``estimator="counts"`` uses visit frequencies instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, polygamma, gammaln, softmax

from .core import CfmParams, IfmParams, Simplex, ValidationError, clamp_normalize, make_simplex
from .density import COUPLED_ATOL, coupling_state, log_beta_fn
from .mcmc import McmcConfig, StepAdapter, _rhat_from_moments, metropolis_accept
from .sampling import CorrelatedPair, make_rng


@dataclass(frozen=True)
class FusionResult:
    posterior: Simplex
    diagnostics: dict | None = field(default=None)

    @property
    def map_label(self) -> int:
        return self.posterior.map_label()


def _as_outputs(outputs) -> np.ndarray:
    if isinstance(outputs, CorrelatedPair):
        outputs = (outputs.x1, outputs.x2)
    rows = [make_simplex(o).probs for o in outputs]
    if len({r.size for r in rows}) != 1:
        raise ValidationError("classifier outputs must share dimension J")
    return np.array(rows)


# ---------------------------------------------------------------- IOP / IFM


def iop_posteriors(X: np.ndarray) -> np.ndarray:
    """Renormalized elementwise product over the classifier axis of ``(N, K, J)``."""
    X = clamp_normalize(X)
    return clamp_normalize(softmax(np.log(X).sum(axis=1), axis=-1))


def fuse_iop(outputs) -> FusionResult:
    X = _as_outputs(outputs)
    return FusionResult(Simplex(iop_posteriors(X[None])[0]))


def ifm_log_scores(X: np.ndarray, alpha: np.ndarray, prior_p: np.ndarray) -> np.ndarray:
    """Unnormalized log-posterior per class, ``(N, J)``."""
    X = clamp_normalize(np.asarray(X, dtype=float))
    alpha = np.asarray(alpha, dtype=float)
    if X.shape[1:] != (alpha.shape[0], alpha.shape[2]):
        raise ValidationError(f"outputs of shape {X.shape[1:]} do not match parameters for K={alpha.shape[0]}, J={alpha.shape[2]}")
    ll = np.einsum("nkl,kjl->nj", np.log(X), alpha - 1.0) - log_beta_fn(alpha).sum(axis=0)
    return ll + np.log(prior_p)


def ifm_posteriors(X: np.ndarray, params: IfmParams) -> np.ndarray:
    return clamp_normalize(softmax(ifm_log_scores(X, params.alpha, params.prior_p), axis=-1))


def fuse_ifm(outputs, params: IfmParams) -> FusionResult:
    X = _as_outputs(outputs)
    return FusionResult(Simplex(ifm_posteriors(X[None], params)[0]))


def meta_classify(output, params: IfmParams) -> FusionResult:
    """Single-classifier IFM; ``params`` must hold exactly one classifier."""
    if params.K != 1:
        raise ValidationError("meta_classify needs the K=1 slice of the parameters (IfmParams.classifier(k))")
    return fuse_ifm([output], params)


# ---------------------------------------------------------------- CFM


def _softplus(x):
    return np.logaddexp(0.0, x)


@dataclass
class _ClassBlock:
    """Correlated-model parameters of the classes the sampler moves between."""

    classes: np.ndarray  # 0-based class indices
    d: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    log_prior: np.ndarray
    alpha: np.ndarray  # (2, F, J) marginals, for initialization

    def __post_init__(self):
        self.lg_d = np.where(self.d > 0, gammaln(np.where(self.d > 0, self.d, 1.0)), 0.0)
        self.lg_a1 = gammaln(self.a1)
        self.lg_a2 = gammaln(self.a2)
        self.active = np.any(self.d > 0, axis=0)
        safe = np.where(self.d > 0, self.d, 1.0)
        # mean and sd of log D under Gamma(delta), for the class-switch map
        self.psi = digamma(safe)
        self.log_sd = 0.5 * np.log(polygamma(1, safe))


def _coord_terms(lx1, lx2, u1, u2, v, active, d, a1, a2, lg_d, lg_a1, lg_a2):
    """Per-coordinate log-target in ``(u, v)`` coordinates, shape ``(..., J)``.

    Includes the change-of-variables terms ``log m_l + log w_l + log(1-w_l)``
    for active coordinates. The ``J * (u1 + u2)`` term (Jacobian of the totals
    plus the ``log T`` reparametrization) is class-free and added by callers.
    ``active`` may be ``True`` to skip the no-shared-component branch.
    """
    l1 = lx1 + u1[..., None]
    l2 = lx2 + u2[..., None]
    y1, y2 = np.exp(l1), np.exp(l2)
    if active is not True:
        no_d = ((a1 - 1.0) * l1 - y1 - lg_a1 + (a2 - 1.0) * l2 - y2 - lg_a2)
        if not np.any(active):
            return np.where(np.isnan(no_d), -np.inf, no_d)
    first = l1 <= l2
    lm = np.where(first, l1, l2)
    log_w = -_softplus(-v)
    log_1w = log_w - v
    lD = lm + log_w
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # log A_k = log(y_k - D); exactly log(m (1 - w)) on the binding side
        lA1 = np.where(first, lm + log_1w, l1 + np.log1p(-np.exp(lD - l1)))
        lA2 = np.where(first, l2 + np.log1p(-np.exp(lD - l2)), lm + log_1w)
        with_d = ((d - 1.0) * lD + np.exp(lD) - y1 - y2 - lg_d
                  + (a1 - 1.0) * lA1 - lg_a1
                  + (a2 - 1.0) * lA2 - lg_a2
                  + lm + log_w + log_1w)
    out = with_d if active is True else np.where(active, with_d, no_d)
    return np.where(np.isnan(out), -np.inf, out)


def _run_cfm_chains(lx1, lx2, block: _ClassBlock, cfg: McmcConfig, rng: np.random.Generator,
                    estimator: str):
    """Sample ``len(lx1)`` examples x ``cfg.n_chains`` chains jointly.

    Returns per-example class probabilities over ``block.classes`` and
    diagnostics.
    """
    N, J = lx1.shape
    C = cfg.n_chains
    F = block.classes.size
    R = N * C
    ex = np.repeat(np.arange(N), C)
    chain = np.tile(np.arange(C), N)
    X1, X2 = lx1[ex], lx2[ex]
    any_active = bool(block.active.any())
    active = True if block.active.all() else block.active

    def gather(t):
        return (block.d[t], block.a1[t], block.a2[t], block.lg_d[t], block.lg_a1[t], block.lg_a2[t])

    # warm start: IFM-MAP class, totals at the Dirichlet precision, w = 1/2
    alpha_f = block.alpha
    ifm_scores = (np.einsum("nl,fl->nf", lx1, alpha_f[0] - 1.0) + np.einsum("nl,fl->nf", lx2, alpha_f[1] - 1.0)
                  - log_beta_fn(alpha_f[0]) - log_beta_fn(alpha_f[1]) + block.log_prior)
    t = np.argmax(ifm_scores, axis=1)[ex]
    u1 = np.log(alpha_f[0][t].sum(axis=1))
    u2 = np.log(alpha_f[1][t].sum(axis=1))
    v = np.zeros((R, J))
    jitter = chain > 0
    u1 = u1 + jitter * rng.normal(0.0, 0.3, R)
    u2 = u2 + jitter * rng.normal(0.0, 0.3, R)
    v = v + jitter[:, None] * rng.normal(0.0, 1.0, (R, J))

    params = gather(t)
    cur = _coord_terms(X1, X2, u1, u2, v, active, *params)
    if np.any(~np.isfinite(cur.sum(axis=1))):
        raise ValidationError("correlated fusion could not find a feasible initial state")

    ad_v = StepAdapter((R, J), 1.0, cfg.adapt_window)
    ad_u1 = StepAdapter(R, 0.3, cfg.adapt_window)
    ad_u2 = StepAdapter(R, 0.3, cfg.adapt_window)
    ad_uu = StepAdapter(R, 0.3, cfg.adapt_window)

    n_keep = cfg.n_keep
    half = n_keep // 2
    acc_p = np.zeros((R, F))
    h1 = np.zeros((2, R, F))
    h2 = np.zeros((2, R, F))
    n_batches = 20 if n_keep >= 40 else max(n_keep // 2, 1)
    batch_len = n_keep // n_batches
    batches = np.zeros((n_batches, R, F))
    kept = 0
    rows = np.arange(R)

    def u_step(u1n, u2n, adapter, adapting):
        nonlocal cur, u1, u2
        new = _coord_terms(X1, X2, u1n, u2n, v, active, *params)
        lr = (new - cur).sum(axis=1) + J * ((u1n - u1) + (u2n - u2))
        ok = metropolis_accept(rng, lr)
        cur = np.where(ok[:, None], new, cur)
        u1 = np.where(ok, u1n, u1)
        u2 = np.where(ok, u2n, u2)
        adapter.record(ok, adapting)

    for it in range(cfg.n_iter):
        adapting = it < cfg.n_burnin
        # shared-component coordinates are conditionally independent given the totals
        if any_active:
            vn = v + ad_v.scale * rng.standard_normal((R, J))
            new = _coord_terms(X1, X2, u1, u2, vn, active, *params)
            ok = metropolis_accept(rng, new - cur) & block.active
            cur = np.where(ok, new, cur)
            v = np.where(ok, vn, v)
            ad_v.record(ok, adapting)
        u_step(u1 + ad_u1.scale * rng.standard_normal(R), u2, ad_u1, adapting)
        u_step(u1, u2 + ad_u2.scale * rng.standard_normal(R), ad_u2, adapting)
        shift = ad_uu.scale * rng.standard_normal(R)
        u_step(u1 + shift, u2 + shift, ad_uu, adapting)

        # exact full-conditional class draw
        allc = _coord_terms(X1[:, None], X2[:, None], u1[:, None], u2[:, None], v[:, None], active,
                            block.d, block.a1, block.a2, block.lg_d, block.lg_a1, block.lg_a2)
        logits = allc.sum(axis=2) + block.log_prior
        probs = softmax(logits, axis=1)
        t = (rng.random(R)[:, None] > np.cumsum(probs, axis=1)[:, :-1]).sum(axis=1)
        cur = allc[rows, t]
        params = gather(t)

        if F > 1 and any_active:
            # class switch that carries each shared component to the matching standardized
            # position of log D under the new class's Gamma(delta); bridges classes whose
            # delta differ by orders of magnitude
            t_new = (t + rng.integers(1, F, R)) % F
            log_slope = np.where(block.active, block.log_sd[t_new] - block.log_sd[t], 0.0)
            lm = np.minimum(X1 + u1[:, None], X2 + u2[:, None])
            log_w = -_softplus(-v)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                lD_new = block.psi[t_new] + np.exp(log_slope) * (log_w + lm - block.psi[t])
                log_w_new = np.where(block.active, lD_new - lm, log_w)
                feasible = np.all(log_w_new < 0, axis=1)
                log_w_new = np.where(log_w_new < 0, log_w_new, log_w)
                log1m_new = np.log1p(-np.exp(log_w_new))
                v_new = np.where(block.active, log_w_new - log1m_new, v)
                jac = np.where(block.active, log_slope - _softplus(v) - log1m_new, 0.0)
            p_new = gather(t_new)
            new = _coord_terms(X1, X2, u1, u2, v_new, active, *p_new)
            lr = (new - cur + jac).sum(axis=1) + block.log_prior[t_new] - block.log_prior[t]
            ok = metropolis_accept(rng, np.where(feasible & np.isfinite(lr), lr, -np.inf))
            t = np.where(ok, t_new, t)
            v = np.where(ok[:, None], v_new, v)
            cur = np.where(ok[:, None], new, cur)
            params = gather(t)

        if it >= cfg.n_burnin and (it - cfg.n_burnin) % cfg.thin == 0:
            draw = probs if estimator == "rao_blackwell" else np.eye(F)[t]
            acc_p += draw
            if kept < half:
                h1[0] += draw
                h1[1] += draw * draw
            if kept >= n_keep - half:
                h2[0] += draw
                h2[1] += draw * draw
            b = kept // batch_len if batch_len else 0
            if b < n_batches:
                batches[b] += draw
            kept += 1

    P = (acc_p / kept).reshape(N, C, F).mean(axis=1)
    diag = {
        "rhat": _rows_rhat(h1, h2, half, N, C),
        "ess": _rows_ess(acc_p, h1, h2, batches, batch_len, kept, N, C),
        "acceptance": {
            "shared": float(ad_v.acceptance_rate()[:, block.active].mean()) if any_active else None,
            "total_1": float(ad_u1.acceptance_rate().mean()),
            "total_2": float(ad_u2.acceptance_rate().mean()),
            "total_joint": float(ad_uu.acceptance_rate().mean()),
        },
    }
    return P, diag


def _rows_rhat(h1, h2, half, N, C):
    if half < 2:
        return np.full(N, np.nan)
    means = np.concatenate([h1[0], h2[0]]).reshape(2, N, C, -1) / half
    sq = np.concatenate([h1[1], h2[1]]).reshape(2, N, C, -1) / half
    var = (sq - means ** 2) * half / (half - 1)
    # chains x halves along one axis
    means = np.moveaxis(means, 2, 1).reshape(2 * C, N, -1)
    var = np.maximum(np.moveaxis(var, 2, 1).reshape(2 * C, N, -1), 0.0)
    r = _rhat_from_moments(means, var, half)
    return np.nanmax(np.where(np.isfinite(r) | np.isinf(r), r, np.nan), axis=1)


def _rows_ess(acc_p, h1, h2, batches, batch_len, kept, N, C):
    if batch_len < 2:
        return np.full(N, np.nan)
    # batch means: ESS = n_batches * Var(draw) / Var(batch mean)
    nb = batches.shape[0]
    var_batch = (batches / batch_len).var(axis=0, ddof=1)
    half = max(kept // 2, 1)
    var_draw = np.maximum((h1[1] + h2[1]) / (2 * half) - (acc_p / kept) ** 2, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ess = np.where(var_batch > 0, nb * var_draw / var_batch, kept)
    ess = np.minimum(ess, kept)
    per_class = ess.reshape(N, C, -1).sum(axis=1)
    return per_class.min(axis=1)


def _class_partition(params: CfmParams):
    alpha = params.alpha
    coupled, free = [], []
    for j in range(params.J):
        state = coupling_state(alpha[0, j], alpha[1, j], params.delta[j])
        if state == "partial":
            raise ValidationError(
                f"class {j + 1}: delta equals one marginal on some coordinates but not all; "
                "only delta < alpha or delta == alpha1 == alpha2 are supported")
        (coupled if state == "coupled" else free).append(j)
    free = np.array(free, dtype=int)
    if free.size:
        pos = params.delta[free] > 0
        if np.any(pos.any(axis=0) & ~pos.all(axis=0)):
            raise ValidationError("delta must be zero for all classes or positive for all classes, per coordinate")
    return np.array(coupled, dtype=int), free


def cfm_posteriors(X1, X2, params: CfmParams, mcmc: McmcConfig | None = None,
                   rng: np.random.Generator | None = None, estimator: str = "rao_blackwell",
                   chunk_size: int = 512):
    """Correlated-model fusion for ``N`` example pairs.

    Returns ``(P, diagnostics)`` with ``P`` of shape ``(N, J)``. Examples
    are processed in chunks of ``chunk_size``, each with its own spawned
    random stream, so results depend on the seed and example order only.
    """
    if estimator not in ("rao_blackwell", "counts"):
        raise ValidationError("estimator must be 'rao_blackwell' or 'counts'")
    mcmc = mcmc or McmcConfig()
    rng = rng if rng is not None else make_rng(mcmc.seed, "cfm-fusion")
    X1 = clamp_normalize(np.atleast_2d(np.asarray(X1, dtype=float)))
    X2 = clamp_normalize(np.atleast_2d(np.asarray(X2, dtype=float)))
    N, J = X1.shape
    if X2.shape != (N, J) or J != params.J:
        raise ValidationError("outputs do not match the parameter dimension J")
    coupled, free = _class_partition(params)
    alpha, delta = params.alpha, params.delta
    log_prior = np.log(params.prior_p)

    P = np.zeros((N, J))
    method = np.full(N, "", dtype=object)
    identical = np.all(np.abs(X1 - X2) <= COUPLED_ATOL, axis=1)

    # fully coupled classes put all their mass on x1 == x2, which dominates any free class there
    diag_rows = identical & (coupled.size > 0)
    if diag_rows.any():
        ld = (np.log(X1[diag_rows]) @ (delta[coupled] - 1.0).T) - log_beta_fn(delta[coupled]) + log_prior[coupled]
        P[np.ix_(diag_rows, coupled)] = softmax(ld, axis=1)
        method[diag_rows] = "coupled"
    rest = ~diag_rows
    if rest.any() and free.size == 0:
        raise ValidationError("all classes are fully coupled but some output pairs differ; they have zero density")

    zero_delta = free.size > 0 and np.all(delta[free] == 0)
    if rest.any() and zero_delta:
        # independent components: the correlated model is exactly the IFM
        X = np.stack([X1[rest], X2[rest]], axis=1)
        scores = ifm_log_scores(X, alpha[:, free], params.prior_p[free])
        P[np.ix_(rest, free)] = softmax(scores, axis=1)
        method[rest] = "independent"

    diagnostics = {"method": method, "rhat": np.full(N, np.nan), "ess": np.full(N, np.nan), "acceptance": []}
    if rest.any() and not zero_delta:
        block = _ClassBlock(free, delta[free], alpha[0, free] - delta[free], alpha[1, free] - delta[free],
                            log_prior[free], alpha[:, free])
        idx = np.flatnonzero(rest)
        chunks = [idx[i:i + chunk_size] for i in range(0, idx.size, chunk_size)]
        streams = rng.spawn(len(chunks))
        for sel, stream in zip(chunks, streams):
            Pc, dg = _run_cfm_chains(np.log(X1[sel]), np.log(X2[sel]), block, mcmc, stream, estimator)
            P[np.ix_(sel, free)] = Pc
            diagnostics["rhat"][sel] = dg["rhat"]
            diagnostics["ess"][sel] = dg["ess"]
            diagnostics["acceptance"].append(dg["acceptance"])
        method[rest] = "mcmc"
    return clamp_normalize(P), diagnostics


def fuse_cfm(outputs, params: CfmParams, mcmc: McmcConfig | None = None,
             rng: np.random.Generator | None = None, estimator: str = "rao_blackwell") -> FusionResult:
    X = _as_outputs(outputs)
    if X.shape[0] != 2:
        raise ValidationError("correlated fusion takes exactly two classifier outputs")
    P, dg = cfm_posteriors(X[0:1], X[1:2], params, mcmc, rng, estimator)
    diag = {
        "method": dg["method"][0],
        "rhat": float(dg["rhat"][0]),
        "ess": float(dg["ess"][0]),
        "acceptance": dg["acceptance"][0] if dg["acceptance"] else None,
    }
    return FusionResult(Simplex(P[0]), diag)


def tv_distance(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())


__all__ = [
    "FusionResult", "fuse_iop", "fuse_ifm", "meta_classify", "fuse_cfm", "cfm_posteriors",
    "iop_posteriors", "ifm_posteriors", "ifm_log_scores", "tv_distance",
]
