"""Domain types and simplex arithmetic shared across the package.

Class labels are plain ``int`` values in ``1..J`` everywhere in the public
API. Arrays indexed by class are 0-based, so label ``j`` lives at index
``j - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

EPS = 1e-9
SUM_TOL = 1e-9


class ValidationError(ValueError):
    """Raised when inputs violate a type invariant."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def clamp_normalize(values: np.ndarray, axis: int = -1) -> np.ndarray:
    """Clamp entries to ``EPS`` and renormalize along ``axis`` (vectorized).

    Slices that already sum to 1 within ``1e-13`` with every entry at least
    ``EPS`` are returned bit-for-bit, which makes the operation idempotent.
    """
    v = np.asarray(values, dtype=float)
    s = v.sum(axis=axis, keepdims=True)
    done = (np.abs(s - 1.0) <= 1e-13) & (v.min(axis=axis, keepdims=True) >= EPS)
    if np.all(done):
        return v.copy()
    v = np.where(done, v, v / s)
    for _ in range(3):
        low = v < EPS
        if not low.any():
            break
        # clamped entries sit exactly at EPS; the rest share the remaining mass
        free = np.where(low, 0.0, v).sum(axis=axis, keepdims=True)
        room = 1.0 - EPS * low.sum(axis=axis, keepdims=True)
        v = np.where(low, EPS, v * room / free)
    return v


@dataclass(frozen=True)
class Simplex:
    """A categorical distribution over ``J >= 2`` classes.

    Construct through :func:`make_simplex`; the raw constructor only checks
    the invariants.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 1 or p.size < 2:
            raise ValidationError(f"simplex needs a 1-d vector of length >= 2, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise ValidationError("simplex entries must be finite and strictly positive")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise ValidationError(f"simplex entries sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @property
    def J(self) -> int:
        return self.probs.size

    def __len__(self) -> int:
        return self.probs.size

    def __iter__(self) -> Iterator[float]:
        return iter(self.probs.tolist())

    def __getitem__(self, i):
        return self.probs[i]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)

    def map_label(self) -> int:
        # argmax returns the first maximum, i.e. lowest class index on ties
        return int(np.argmax(self.probs)) + 1


def make_simplex(values: Sequence[float] | np.ndarray | Simplex) -> Simplex:
    """Normalize non-negative weights into a :class:`Simplex`.

    Entries are clamped to at least ``EPS`` and renormalized, so zero
    probabilities never reach a logarithm.

    >>> make_simplex([3, 1, 1]).probs
    array([0.6, 0.2, 0.2])
    """
    if isinstance(values, Simplex):
        return values
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValidationError(f"need at least 2 values, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("values must be finite")
    if np.any(v < 0):
        raise ValidationError("values must be non-negative")
    if not np.any(v > 0):
        raise ValidationError("at least one value must be positive")
    return Simplex(clamp_normalize(v))


def check_label(t: int, J: int) -> int:
    t_int = int(t)
    if t_int != t or not 1 <= t_int <= J:
        raise ValidationError(f"class label must be an integer in 1..{J}, got {t!r}")
    return t_int


def entropy(p: Simplex | Sequence[float]) -> float:
    """Shannon entropy in nats."""
    probs = make_simplex(p).probs
    return float(-np.sum(probs * np.log(probs)))


def log_loss(p: Simplex | Sequence[float], t: int) -> float:
    """Negative log-probability (nats) assigned to the true class ``t``."""
    probs = make_simplex(p).probs
    return float(-np.log(probs[check_label(t, probs.size) - 1]))


def entropies(P: np.ndarray) -> np.ndarray:
    """Row-wise entropy for an ``(N, J)`` array of clamped probabilities."""
    P = clamp_normalize(P)
    return -np.sum(P * np.log(P), axis=-1)


def log_losses(P: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Row-wise log-loss; ``labels`` are 1-based."""
    P = clamp_normalize(P)
    idx = np.asarray(labels, dtype=int) - 1
    return -np.log(P[np.arange(P.shape[0]), idx])


@dataclass(frozen=True)
class LabeledExample:
    outputs: tuple[Simplex, ...]
    label: int

    def __post_init__(self):
        if len(self.outputs) < 1:
            raise ValidationError("an example needs at least one classifier output")
        J = self.outputs[0].J
        if any(o.J != J for o in self.outputs):
            raise ValidationError("all classifier outputs must share dimension J")
        object.__setattr__(self, "label", check_label(self.label, J))


@dataclass(frozen=True)
class LabeledDataset:
    """``I`` examples of ``K`` classifier outputs over ``J`` classes.

    Stored column-wise: ``outputs`` has shape ``(I, K, J)`` and ``labels`` are
    1-based integers of shape ``(I,)``.
    """

    outputs: np.ndarray
    labels: np.ndarray
    ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.array(self.outputs, dtype=float)
        if X.ndim != 3 or X.shape[0] < 1 or X.shape[2] < 2:
            raise ValidationError(f"outputs must have shape (I>=1, K, J>=2), got {X.shape}")
        X = clamp_normalize(X)
        t = np.asarray(self.labels)
        if t.shape != (X.shape[0],):
            raise ValidationError("labels must have one entry per example")
        if not np.all(t == np.round(t)) or t.min() < 1 or t.max() > X.shape[2]:
            raise ValidationError(f"labels must be integers in 1..{X.shape[2]}")
        ids = tuple(self.ids) if self.ids else tuple(f"e{i + 1}" for i in range(X.shape[0]))
        if len(ids) != X.shape[0]:
            raise ValidationError("ids must have one entry per example")
        X.setflags(write=False)
        t = t.astype(np.int64)
        t.setflags(write=False)
        object.__setattr__(self, "outputs", X)
        object.__setattr__(self, "labels", t)
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_examples(cls, examples: Sequence[LabeledExample], ids: Sequence[str] = ()) -> "LabeledDataset":
        X = np.array([[o.probs for o in ex.outputs] for ex in examples])
        t = np.array([ex.label for ex in examples])
        return cls(X, t, tuple(ids))

    @property
    def I(self) -> int:  # noqa: E743
        return self.outputs.shape[0]

    @property
    def K(self) -> int:
        return self.outputs.shape[1]

    @property
    def J(self) -> int:
        return self.outputs.shape[2]

    def __len__(self) -> int:
        return self.I

    @property
    def examples(self) -> list[LabeledExample]:
        return [
            LabeledExample(tuple(Simplex(row) for row in self.outputs[i]), int(self.labels[i]))
            for i in range(self.I)
        ]

    def subset(self, index) -> "LabeledDataset":
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        return LabeledDataset(self.outputs[index], self.labels[index], tuple(self.ids[i] for i in index))

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels - 1, minlength=self.J)


@dataclass(frozen=True)
class IfmParams:
    """Dirichlet parameters ``alpha[k, j]`` of classifier ``k`` given class ``j``."""

    alpha: np.ndarray
    prior_p: np.ndarray | None = None

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float)
        if a.ndim != 3 or a.shape[1] != a.shape[2] or a.shape[2] < 2:
            raise ValidationError(f"alpha must have shape (K, J, J), got {a.shape}")
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise ValidationError("alpha entries must be finite and > 0")
        J = a.shape[2]
        p = np.full(J, 1.0 / J) if self.prior_p is None else make_simplex(self.prior_p).probs
        if p.size != J:
            raise ValidationError("prior_p must have dimension J")
        object.__setattr__(self, "alpha", _frozen(a))
        object.__setattr__(self, "prior_p", _frozen(p))

    @property
    def K(self) -> int:
        return self.alpha.shape[0]

    @property
    def J(self) -> int:
        return self.alpha.shape[2]

    def classifier(self, k: int) -> "IfmParams":
        """The single-classifier slice used by the meta classifier (0-based ``k``)."""
        return IfmParams(self.alpha[k : k + 1], self.prior_p)


@dataclass(frozen=True)
class CfmParams:
    """IFM marginals plus correlation rows ``delta[j]`` for ``K = 2``.

    ``delta == min_k alpha`` is allowed and encodes full coupling.
    """

    ifm: IfmParams
    delta: np.ndarray

    def __post_init__(self):
        d = np.array(self.delta, dtype=float)
        if self.ifm.K != 2:
            raise ValidationError("the correlated model is defined for K = 2 classifiers")
        if d.shape != (self.ifm.J, self.ifm.J):
            raise ValidationError(f"delta must have shape (J, J), got {d.shape}")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValidationError("delta entries must be finite and >= 0")
        if np.any(d > self.ifm.alpha.min(axis=0)):
            raise ValidationError("delta must not exceed min_k alpha elementwise")
        object.__setattr__(self, "delta", _frozen(d))

    @property
    def alpha(self) -> np.ndarray:
        return self.ifm.alpha

    @property
    def prior_p(self) -> np.ndarray:
        return self.ifm.prior_p

    @property
    def J(self) -> int:
        return self.ifm.J

    @property
    def K(self) -> int:
        return 2
