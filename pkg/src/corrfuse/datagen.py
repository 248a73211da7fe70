"""Synthetic test sets drawn from the correlated fusion model."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .calibration import N_SIM, calibrate_params
from .core import CfmParams, IfmParams, LabeledDataset, ValidationError
from .sampling import correlated_dirichlet_rvs, make_rng

SIM1_ROWS = ((3.0, 2.0, 2.0), (2.0, 3.0, 2.0), (2.0, 2.0, 3.0))
SIM2_ROWS = ((12.0, 8.0, 8.0), (8.0, 12.0, 8.0), (8.0, 8.0, 12.0))
CORRELATION_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)


def structured_alpha(J: int, a: float, n: float) -> np.ndarray:
    """Rows ``a * 1 + n * e_j``: the Dirichlet family under which the
    independent model weights a classifier's output by the power ``n``."""
    return a * np.ones((J, J)) + n * np.eye(J)


def experiment_alpha(name: str) -> np.ndarray:
    rows = {"sim1": SIM1_ROWS, "sim2": SIM2_ROWS}.get(name)
    if rows is None:
        raise ValidationError(f"unknown experiment {name!r}; expected 'sim1' or 'sim2'")
    return np.array([rows, rows], dtype=float)


@dataclass(frozen=True)
class SimSpec:
    alpha: np.ndarray
    r: float
    n_test_sets: int = 25
    examples_per_class: int = 20
    seed: int = 0
    n_sim: int = N_SIM

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 3 or a.shape[0] != 2 or a.shape[1] != a.shape[2]:
            raise ValidationError("alpha must have shape (2, J, J)")
        if not np.all(a > 0):
            raise ValidationError("alpha entries must be > 0")
        if not 0.0 <= self.r <= 1.0:
            raise ValidationError("r must lie in [0, 1]")
        if self.examples_per_class < 1 or self.n_test_sets < 1:
            raise ValidationError("examples_per_class and n_test_sets must be >= 1")
        object.__setattr__(self, "alpha", a)

    @classmethod
    def experiment(cls, name: str, r: float, **kw) -> "SimSpec":
        return cls(experiment_alpha(name), r, **kw)

    @property
    def J(self) -> int:
        return self.alpha.shape[1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha"] = self.alpha.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimSpec":
        fields = {k: d[k] for k in ("alpha", "r") if k in d}
        if len(fields) != 2:
            raise ValidationError("simulation spec needs 'alpha' and 'r'")
        for k in ("n_test_sets", "examples_per_class", "seed", "n_sim"):
            if k in d:
                fields[k] = d[k]
        return cls(**fields)


@dataclass
class SimulatedData:
    params: CfmParams
    test_sets: list = field(default_factory=list)


def true_params(spec: SimSpec) -> CfmParams:
    """Calibrated generating parameters (uniform class prior)."""
    return calibrate_params(IfmParams(spec.alpha), spec.r, spec.n_sim, spec.seed)


def sample_cfm_dataset(params: CfmParams, examples_per_class: int, rng: np.random.Generator,
                       id_prefix: str = "e") -> LabeledDataset:
    """Balanced dataset: ``examples_per_class`` pairs per class, grouped by class."""
    J = params.J
    outs = []
    for j in range(J):
        x1, x2 = correlated_dirichlet_rvs(rng, params.alpha[0, j], params.alpha[1, j], params.delta[j],
                                          examples_per_class)
        outs.append(np.stack([x1, x2], axis=1))
    labels = np.repeat(np.arange(1, J + 1), examples_per_class)
    ids = tuple(f"{id_prefix}{i + 1}" for i in range(labels.size))
    return LabeledDataset(np.concatenate(outs), labels, ids)


def generate_dataset(spec: SimSpec, params: CfmParams | None = None) -> list[LabeledDataset]:
    """``spec.n_test_sets`` balanced test sets; ``params`` skips calibration."""
    params = params or true_params(spec)
    return [sample_cfm_dataset(params, spec.examples_per_class, make_rng(spec.seed, "test-set", s))
            for s in range(spec.n_test_sets)]


def simulate(spec: SimSpec) -> SimulatedData:
    params = true_params(spec)
    return SimulatedData(params, generate_dataset(spec, params))
