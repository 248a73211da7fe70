"""Entropy / log-loss evaluation of base, fused and meta-classifier outputs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CfmParams, LabeledDataset, ValidationError, entropies, log_losses
from .fusion import cfm_posteriors, ifm_posteriors, iop_posteriors
from .mcmc import McmcConfig
from .sampling import make_rng

METHODS = ("C1", "C2", "IOP", "IFM", "CFM", "M1", "M2")


def method_posteriors(data: LabeledDataset, params: CfmParams, mcmc: McmcConfig | None = None,
                      rng: np.random.Generator | None = None, methods=METHODS) -> tuple[dict, dict]:
    """Posteriors of every requested method on one dataset, plus CFM diagnostics."""
    if data.K != 2:
        raise ValidationError("the comparison needs K = 2 classifier outputs")
    X = data.outputs
    out, diag = {}, {}
    for m in methods:
        if m in ("C1", "C2"):
            out[m] = X[:, int(m[1]) - 1]
        elif m == "IOP":
            out[m] = iop_posteriors(X)
        elif m == "IFM":
            out[m] = ifm_posteriors(X, params.ifm)
        elif m in ("M1", "M2"):
            k = int(m[1]) - 1
            out[m] = ifm_posteriors(X[:, k:k + 1], params.ifm.classifier(k))
        elif m == "CFM":
            out[m], diag = cfm_posteriors(X[:, 0], X[:, 1], params, mcmc, rng)
        else:
            raise ValidationError(f"unknown method {m!r}")
    return out, diag


@dataclass
class MethodStats:
    entropy_mean: float
    entropy_sd: float
    log_loss_mean: float
    log_loss_sd: float
    n_runs: int
    n_examples: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _sd(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


@dataclass
class ExperimentReport:
    """Per-method means over runs (test sets or splits) of per-run mean
    entropy and log-loss, with standard deviations across runs."""

    methods: dict
    config: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    per_run: dict = field(default_factory=dict)

    @classmethod
    def from_runs(cls, runs: list[dict], config: dict | None = None, seeds: dict | None = None):
        """``runs``: one ``{method: (posteriors, labels)}`` dict per run."""
        per_run: dict[str, dict[str, list]] = {}
        for run in runs:
            for m, (P, t) in run.items():
                rec = per_run.setdefault(m, {"entropy": [], "log_loss": [], "n": []})
                rec["entropy"].append(float(entropies(P).mean()))
                rec["log_loss"].append(float(log_losses(P, t).mean()))
                rec["n"].append(int(len(t)))
        order = [m for m in METHODS if m in per_run] + sorted(m for m in per_run if m not in METHODS)
        stats = {}
        for m in order:
            e, ll = np.array(per_run[m]["entropy"]), np.array(per_run[m]["log_loss"])
            stats[m] = MethodStats(float(e.mean()), _sd(e), float(ll.mean()), _sd(ll), e.size,
                                   int(sum(per_run[m]["n"])))
        return cls(stats, config or {}, seeds or {}, {m: per_run[m] for m in order})

    def to_dict(self) -> dict:
        return {
            "methods": {m: s.to_dict() for m, s in self.methods.items()},
            "per_run": self.per_run,
            "config": self.config,
            "seeds": self.seeds,
            "plot": self.plot_series(),
        }

    def plot_series(self) -> dict:
        names = list(self.methods)
        return {
            "x": names,
            "entropy": {"y": [self.methods[m].entropy_mean for m in names],
                        "err": [self.methods[m].entropy_sd for m in names]},
            "log_loss": {"y": [self.methods[m].log_loss_mean for m in names],
                         "err": [self.methods[m].log_loss_sd for m in names]},
        }

    def table(self) -> str:
        head = f"{'method':<8}{'entropy':>10}{'sd':>9}{'log-loss':>11}{'sd':>9}{'runs':>6}{'n':>8}"
        lines = [head, "-" * len(head)]
        for m, s in self.methods.items():
            lines.append(f"{m:<8}{s.entropy_mean:>10.4f}{s.entropy_sd:>9.4f}{s.log_loss_mean:>11.4f}"
                         f"{s.log_loss_sd:>9.4f}{s.n_runs:>6d}{s.n_examples:>8d}")
        return "\n".join(lines) + "\n"

    def tsv(self) -> str:
        """gnuplot-ready: one row per method, columns index name H sdH L sdL."""
        rows = ["# idx\tmethod\tentropy\tentropy_sd\tlog_loss\tlog_loss_sd"]
        for i, (m, s) in enumerate(self.methods.items()):
            rows.append(f"{i}\t{m}\t{s.entropy_mean!r}\t{s.entropy_sd!r}\t{s.log_loss_mean!r}\t{s.log_loss_sd!r}")
        return "\n".join(rows) + "\n"


def evaluate_test_sets(test_sets: list[LabeledDataset], params: CfmParams, mcmc: McmcConfig | None = None,
                       seed: int = 0, methods=METHODS, progress=None) -> tuple[ExperimentReport, list]:
    """Fuse every test set with known parameters and summarize.

    Each test set's correlated fusion gets its own stream derived from
    ``seed`` and the set index.
    """
    mcmc = mcmc or McmcConfig(seed=seed)
    runs, diags = [], []
    for s, data in enumerate(test_sets):
        post, diag = method_posteriors(data, params, mcmc, make_rng(seed, "fuse-set", s), methods)
        runs.append({m: (P, data.labels) for m, P in post.items()})
        diags.append(diag)
        if progress:
            progress(s + 1, len(test_sets))
    return ExperimentReport.from_runs(runs), diags
