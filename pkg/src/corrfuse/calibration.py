"""Mapping between correlation parameters and Pearson correlation levels.

``delta`` is parameterized as ``c * min(alpha1, alpha2)`` with a scalar
``c in [0, 1]``; the correlation level of a parameter row is the mean over
dimensions of the Pearson correlation between ``x1_l`` and ``x2_l``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CfmParams, IfmParams, LabeledDataset, ValidationError
from .sampling import check_correlated_params, correlated_dirichlet_rvs, make_rng

N_SIM = 200_000
MAX_ITER = 40
R_TOL = 0.01


class CalibrationError(RuntimeError):
    def __init__(self, message: str, ceiling: float | None = None):
        super().__init__(message)
        self.ceiling = ceiling


@dataclass(frozen=True)
class CorrelationProfile:
    """``matrix[j, l]``: correlation of ``(x1_l, x2_l)`` among examples of class ``j+1``.

    Undefined (zero-variance) entries are NaN.
    """

    matrix: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.nanmean(self.matrix))

    @property
    def range(self) -> tuple[float, float]:
        return float(np.nanmin(self.matrix)), float(np.nanmax(self.matrix))


def pearson_columns(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Pearson correlation; NaN where either column is constant."""
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    num = (a * b).sum(axis=0)
    den = np.sqrt((a * a).sum(axis=0) * (b * b).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = num / den
    r = np.where(den > 1e-300, r, np.nan)
    return np.clip(r, -1.0, 1.0)


def measure_correlation(data: LabeledDataset) -> CorrelationProfile:
    if data.K != 2:
        raise ValidationError("correlation profiles are defined for K = 2")
    counts = data.class_counts()
    if np.any(counts < 2):
        raise ValidationError("need at least 2 examples per class")
    M = np.full((data.J, data.J), np.nan)
    for j in range(data.J):
        sel = data.labels == j + 1
        X = data.outputs[sel]
        # identical columns are perfectly correlated even at float noise level
        same = np.all(X[:, 0] == X[:, 1], axis=0) & (X[:, 0].std(axis=0) > 0)
        M[j] = np.where(same, 1.0, pearson_columns(X[:, 0], X[:, 1]))
    return CorrelationProfile(M)


def simulated_correlation(alpha1, alpha2, c: float, n_sim: int, seed: int) -> float:
    a1, a2 = np.asarray(alpha1, dtype=float), np.asarray(alpha2, dtype=float)
    x1, x2 = correlated_dirichlet_rvs(make_rng(seed), a1, a2, c * np.minimum(a1, a2), n_sim)
    if c >= 1.0 and np.array_equal(a1, a2):
        return 1.0
    return float(np.nanmean(pearson_columns(x1, x2)))


def calibrate_delta(alpha1, alpha2, target_r: float, n_sim: int = N_SIM,
                    rng: np.random.Generator | int | None = None, tol: float = R_TOL,
                    max_iter: int = MAX_ITER) -> np.ndarray:
    """Find ``delta = c * min(alpha1, alpha2)`` whose simulated mean correlation is ``target_r``.

    Every bisection step reuses one seed (common random numbers), which keeps
    the simulated curve monotone in ``c``.
    """
    a1, a2, _ = check_correlated_params(alpha1, alpha2, np.zeros(np.size(alpha1)))
    if not 0.0 <= target_r <= 1.0:
        raise ValidationError("target_r must lie in [0, 1]")
    base = np.minimum(a1, a2)
    if target_r == 0.0:
        return np.zeros_like(base)
    equal = np.array_equal(a1, a2)
    if target_r == 1.0:
        if equal:
            return base.copy()
        ceiling = simulated_correlation(a1, a2, 1.0, n_sim, _seed(rng))
        raise CalibrationError(
            f"correlation 1 needs equal marginals; the achievable ceiling here is {ceiling:.3f}", ceiling)
    seed = _seed(rng)
    if not equal:
        ceiling = simulated_correlation(a1, a2, 1.0, n_sim, seed)
        if target_r > ceiling + tol:
            raise CalibrationError(
                f"target correlation {target_r} exceeds the achievable ceiling {ceiling:.3f}", ceiling)
    lo, hi = 0.0, 1.0
    c = target_r
    for _ in range(max_iter):
        r_hat = simulated_correlation(a1, a2, c, n_sim, seed)
        if abs(r_hat - target_r) <= tol:
            break
        if r_hat < target_r:
            lo = c
        else:
            hi = c
        c = 0.5 * (lo + hi)
    else:
        raise CalibrationError(f"bisection did not reach |r - {target_r}| <= {tol} in {max_iter} steps")
    return c * base


def _seed(rng) -> int:
    if rng is None:
        return 0
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    return int(rng.integers(2**63))


def calibrate_params(ifm: IfmParams, target_r: float, n_sim: int = N_SIM, seed: int = 0) -> CfmParams:
    """Calibrate every class row of a ``K = 2`` model to the same correlation level."""
    if ifm.K != 2:
        raise ValidationError("calibration needs K = 2 classifiers")
    delta = np.stack([
        calibrate_delta(ifm.alpha[0, j], ifm.alpha[1, j], target_r, n_sim, seed + j)
        for j in range(ifm.J)
    ])
    return CfmParams(ifm, np.minimum(delta, ifm.alpha.min(axis=0)))
