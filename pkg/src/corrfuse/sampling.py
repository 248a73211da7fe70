"""Seeded gamma, Dirichlet and correlated-Dirichlet variates.

Gamma draws come from :meth:`numpy.random.Generator.gamma`, which uses the
Marsaglia-Tsang squeeze method and, for ``shape < 1``, the boost
``G(shape + 1) * U**(1/shape)``. Shape 0 yields exactly 0, which is the
point-mass convention used for fully coupled or uncorrelated components.

The correlated pair is built from ``3J`` independent unit-scale gammas::

    A1_l ~ Gamma(alpha1_l - delta_l), A2_l ~ Gamma(alpha2_l - delta_l), D_l ~ Gamma(delta_l)
    x1 = (A1 + D) / sum(A1 + D),    x2 = (A2 + D) / sum(A2 + D)

so each ``xk`` is marginally ``Dirichlet(alphak)`` and the shared ``D``
induces positive correlation between ``x1_l`` and ``x2_l``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .core import Simplex, ValidationError, clamp_normalize, make_simplex

RngState = np.random.Generator


def make_rng(seed: int, *task_ids: int | str) -> np.random.Generator:
    """Independent, reproducible stream for ``(seed, task_ids...)``.

    String task ids are hashed to integers, so ``make_rng(7, "chain", 3)``
    always yields the same stream regardless of what other streams exist.
    """
    key = []
    for t in task_ids:
        if isinstance(t, str):
            t = int.from_bytes(hashlib.sha256(t.encode()).digest()[:8], "little")
        key.append(int(t))
    ss = np.random.SeedSequence(entropy=int(seed) % 2**64, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *task_ids: int | str) -> int:
    return int(make_rng(seed, *task_ids).integers(2**63))


@dataclass(frozen=True)
class CorrelatedPair:
    x1: Simplex
    x2: Simplex

    def __post_init__(self):
        if self.x1.J != self.x2.J:
            raise ValidationError("correlated pair members must share dimension J")

    @property
    def J(self) -> int:
        return self.x1.J


def sample_gamma(rng: np.random.Generator, shape, scale=1.0, size=None):
    shape_arr = np.asarray(shape, dtype=float)
    if not np.all(np.isfinite(shape_arr)) or np.any(shape_arr < 0):
        raise ValidationError("gamma shape must be finite and >= 0")
    if not np.all(np.asarray(scale) > 0):
        raise ValidationError("gamma scale must be > 0")
    out = rng.gamma(shape_arr, scale, size=size)
    return float(out) if np.ndim(out) == 0 else out


def _check_alpha(alpha) -> np.ndarray:
    a = np.asarray(alpha, dtype=float)
    if a.ndim != 1 or a.size < 2:
        raise ValidationError("alpha must be a vector of length >= 2")
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise ValidationError("alpha entries must be finite and > 0")
    return a


def dirichlet_rvs(rng: np.random.Generator, alpha, size: int) -> np.ndarray:
    """``(size, J)`` array of Dirichlet draws (clamped, see :func:`clamp_normalize`)."""
    a = _check_alpha(alpha)
    g = rng.gamma(a, size=(size, a.size))
    return _normalize_rows(g)


def sample_dirichlet(rng: np.random.Generator, alpha) -> Simplex:
    return Simplex(dirichlet_rvs(rng, alpha, 1)[0])


def _normalize_rows(g: np.ndarray) -> np.ndarray:
    s = g.sum(axis=-1, keepdims=True)
    # every gamma underflowed to zero (only plausible for tiny shapes)
    bad = s[..., 0] <= 0
    if np.any(bad):
        g = g.copy()
        g[bad] = 1.0
        s = g.sum(axis=-1, keepdims=True)
    return clamp_normalize(g / s)


def check_correlated_params(alpha1, alpha2, delta) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a1, a2 = _check_alpha(alpha1), _check_alpha(alpha2)
    d = np.asarray(delta, dtype=float)
    if not (a1.shape == a2.shape == d.shape):
        raise ValidationError("alpha1, alpha2 and delta must share length J")
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise ValidationError("delta entries must be finite and >= 0")
    if np.any(d > np.minimum(a1, a2)):
        raise ValidationError("delta must satisfy delta <= min(alpha1, alpha2) elementwise")
    return a1, a2, d


def correlated_dirichlet_rvs(rng: np.random.Generator, alpha1, alpha2, delta, size: int):
    """Draw ``size`` correlated pairs; returns two ``(size, J)`` arrays."""
    a1, a2, d = check_correlated_params(alpha1, alpha2, delta)
    J = d.size
    # fixed draw order: shared D first, then A1, then A2
    D = rng.gamma(np.broadcast_to(d, (size, J)))
    A1 = rng.gamma(np.broadcast_to(a1 - d, (size, J)))
    A2 = rng.gamma(np.broadcast_to(a2 - d, (size, J)))
    return _normalize_rows(A1 + D), _normalize_rows(A2 + D)


def sample_correlated_dirichlet(rng: np.random.Generator, alpha1, alpha2, delta) -> CorrelatedPair:
    x1, x2 = correlated_dirichlet_rvs(rng, alpha1, alpha2, delta, 1)
    return CorrelatedPair(Simplex(x1[0]), Simplex(x2[0]))


def sample_class(rng: np.random.Generator, p, size=None):
    """Categorical draw(s) returning 1-based labels."""
    probs = make_simplex(p).probs
    draws = rng.choice(probs.size, size=size, p=probs) + 1
    return int(draws) if size is None else draws
