"""Chain configuration, step-size adaptation and convergence diagnostics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import ValidationError

TARGET_ACCEPT = (0.25, 0.45)


@dataclass(frozen=True)
class McmcConfig:
    """Chain controls. ``adapt_window`` is the number of burn-in iterations
    between step-size adjustments."""

    n_chains: int = 4
    n_iter: int = 5000
    n_burnin: int = 1000
    thin: int = 1
    adapt_window: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValidationError("n_chains must be >= 1")
        if not self.n_iter > self.n_burnin >= 0:
            raise ValidationError("need n_iter > n_burnin >= 0")
        if self.thin < 1 or self.adapt_window < 1:
            raise ValidationError("thin and adapt_window must be >= 1")

    @classmethod
    def for_fitting(cls, **overrides) -> "McmcConfig":
        return cls(**{"n_iter": 20000, "n_burnin": 5000, **overrides})

    @property
    def n_keep(self) -> int:
        return len(range(self.n_burnin, self.n_iter, self.thin))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PosteriorSummary:
    """Posterior means as point estimate plus per-parameter diagnostics.

    ``point`` is an :class:`~corrfuse.core.IfmParams` or
    :class:`~corrfuse.core.CfmParams`; ``sd``, ``rhat`` and ``ess`` are dicts
    of arrays keyed by parameter name (``"alpha"``, ``"delta"``).
    """

    point: object
    sd: dict
    rhat: dict
    ess: dict
    acceptance: dict
    config: McmcConfig
    extra: dict = field(default_factory=dict)

    @property
    def max_rhat(self) -> float:
        vals = [np.nanmax(v) for v in self.rhat.values() if np.size(v)]
        return float(max(vals)) if vals else float("nan")

    @property
    def converged(self) -> bool:
        return self.max_rhat <= 1.05


class StepAdapter:
    """Per-coordinate random-walk scales tuned toward 25-45% acceptance.

    Counts accepts over a window; at each window end the log-scale moves by
    a shrinking amount toward the target band.
    """

    def __init__(self, shape, init: float = 0.5, window: int = 50):
        self.log_scale = np.full(shape, math.log(init))
        self.window = window
        self.accepts = np.zeros(shape)
        self.tries = 0
        self.n_windows = 0
        self.total_accepts = np.zeros(shape)
        self.total_tries = 0

    @property
    def scale(self) -> np.ndarray:
        return np.exp(self.log_scale)

    def record(self, accepted: np.ndarray, adapting: bool):
        if adapting:
            self.accepts += accepted
            self.tries += 1
            if self.tries == self.window:
                rate = self.accepts / self.tries
                gain = 1.0 / math.sqrt(1.0 + 0.1 * self.n_windows)
                lo, hi = TARGET_ACCEPT
                self.log_scale += gain * (np.where(rate < lo, rate - lo, 0.0) + np.where(rate > hi, rate - hi, 0.0)) * 3.0
                self.accepts[...] = 0.0
                self.tries = 0
                self.n_windows += 1
        else:
            self.total_accepts += accepted
            self.total_tries += 1

    def acceptance_rate(self) -> np.ndarray:
        return self.total_accepts / max(self.total_tries, 1)


def split_rhat(draws: np.ndarray) -> np.ndarray:
    """Split-R-hat over axis 0 (draws) and axis 1 (chains); trailing axes are parameters."""
    draws = np.asarray(draws, dtype=float)
    n = draws.shape[0] // 2
    if n < 2:
        return np.full(draws.shape[2:], np.nan)
    halves = np.concatenate([draws[:n], draws[-n:]], axis=1)
    return _rhat_from_moments(halves.mean(axis=0), halves.var(axis=0, ddof=1), n)


def _rhat_from_moments(means: np.ndarray, variances: np.ndarray, n: int) -> np.ndarray:
    """R-hat from per-chain means and variances; chains along axis 0."""
    B = n * means.var(axis=0, ddof=1)
    W = variances.mean(axis=0)
    var_plus = (n - 1) / n * W + B / n
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(var_plus / W)
    # constant traces: identical chains are converged, differing ones are not
    return np.where(W > 0, r, np.where(B > 0, np.inf, 1.0))


def effective_sample_size(draws: np.ndarray) -> np.ndarray:
    """Multi-chain ESS with Geyer's initial positive sequence.

    ``draws`` has shape ``(n_draws, n_chains, ...)``.
    """
    x = np.asarray(draws, dtype=float)
    n, m = x.shape[:2]
    flat = x.reshape(n, m, -1)
    out = np.empty(flat.shape[2])
    for p in range(flat.shape[2]):
        out[p] = _ess_1d(flat[:, :, p])
    return out.reshape(x.shape[2:])


def _ess_1d(x: np.ndarray) -> float:
    n, m = x.shape
    if n < 4:
        return float("nan")
    centered = x - x.mean(axis=0)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centered, n=nfft, axis=0)
    acov = np.fft.irfft(f * np.conj(f), n=nfft, axis=0)[:n] / n
    chain_var = acov[0] * n / (n - 1)
    W = chain_var.mean()
    var_plus = W * (n - 1) / n + (x.mean(axis=0).var(ddof=1) if m > 1 else 0.0)
    if var_plus <= 0:
        return float(n * m)
    rho = 1.0 - (W - acov.mean(axis=1)) / var_plus
    rho[0] = 1.0
    total = 0.0
    prev = np.inf
    for t in range(0, n - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair < 0:
            break
        pair = min(pair, prev)
        total += pair
        prev = pair
    tau = max(2.0 * total - 1.0, 1.0 / math.log10(n * m))
    return float(n * m / tau)


def metropolis_accept(rng: np.random.Generator, log_ratio: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        ok = np.log(rng.random(np.shape(log_ratio))) < log_ratio
    return ok & ~np.isnan(log_ratio)
