"""``corrfuse`` command line: calibrate, simulate, fit, fuse, eval, replicate.

Exit codes: 0 success, 1 validation or usage error, 2 numerical or
calibration failure, 3 convergence failure. Seeds default to the
``CORRFUSE_SEED`` environment variable, then 0.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import CalibrationError, calibrate_params
from .core import CfmParams, ValidationError
from .datagen import SimSpec, experiment_alpha, generate_dataset, true_params
from .dataio import (
    REPORT_FORMAT, FORMAT_VERSION, atomic_write_text, config_hash, read_dataset, read_fused,
    read_json, read_params, write_dataset, write_fused, write_json, write_params,
)
from .density import EstimationError
from .evaluation import ExperimentReport
from .fusion import cfm_posteriors, ifm_posteriors, iop_posteriors
from .inference import GammaPrior, InferenceError, fit_cfm_joint, fit_cfm_stepwise, fit_ifm
from .mcmc import McmcConfig

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_UNCONVERGED = 0, 1, 2, 3
RHAT_FAIL = 1.2
FUSE_BLOCK = 512


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("CORRFUSE_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"CORRFUSE_SEED must be an integer, got {env!r}") from None


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _mcmc(path, seed: int, fitting: bool) -> McmcConfig:
    base = McmcConfig.for_fitting(seed=seed) if fitting else McmcConfig(seed=seed)
    if path is None:
        return base
    cfg = {**base.to_dict(), **read_json(path), "seed": seed}
    unknown = set(cfg) - set(base.to_dict())
    if unknown:
        raise ValidationError(f"{path}: unknown MCMC fields {sorted(unknown)}")
    return McmcConfig(**cfg)


def _provenance(args, seed: int, config: dict | None = None, inputs: dict | None = None) -> dict:
    prov = {"command": args.command, "version": __version__, "seed": seed}
    if config is not None:
        prov["config"] = config
        prov["config_hash"] = config_hash(config)
    if inputs:
        prov["inputs"] = {k: {"path": str(v), "sha256": _sha256(v)} for k, v in inputs.items()}
    return prov


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- commands


def cmd_calibrate(args) -> int:
    seed = _seed(args.seed)
    ifm = read_params(args.alpha)
    if isinstance(ifm, CfmParams):
        ifm = ifm.ifm
    params = calibrate_params(ifm, args.r, args.n_sim, seed)
    write_params(args.out, params, _provenance(args, seed, {"r": args.r, "n_sim": args.n_sim},
                                               {"alpha": args.alpha}))
    print(f"delta written to {args.out}")
    return EXIT_OK


def _spec_from_json(path, seed_override) -> SimSpec:
    doc = dict(read_json(path))
    if "experiment" in doc:
        doc.setdefault("alpha", experiment_alpha(doc.pop("experiment")).tolist())
    if seed_override is not None:
        doc["seed"] = seed_override
    elif "seed" not in doc:
        doc["seed"] = _seed(None)
    return SimSpec.from_dict(doc)


def cmd_simulate(args) -> int:
    spec = _spec_from_json(args.spec, args.seed)
    params = true_params(spec)
    sets = generate_dataset(spec, params)
    out = Path(args.out_dir)
    files = []
    for s, data in enumerate(sets):
        name = f"set_{s + 1:03d}.csv"
        write_dataset(out / name, data)
        files.append(name)
    prov = _provenance(args, spec.seed, spec.to_dict())
    write_params(out / "params.json", params, prov)
    write_json(out / "manifest.json", {"spec": spec.to_dict(), "params": "params.json", "files": files,
                                       "provenance": prov})
    print(f"wrote {len(files)} test sets to {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    seed = _seed(args.seed)
    mcmc = _mcmc(args.mcmc, seed, fitting=True)
    data = read_dataset(args.train)
    prior = GammaPrior(args.prior_shape, args.prior_rate)
    inputs = {"train": args.train}
    if args.model == "ifm":
        summary = fit_ifm(data, prior, mcmc)
    elif args.model == "cfm-stepwise":
        if args.alpha:
            alpha_hat = read_params(args.alpha)
            alpha_hat = alpha_hat.ifm if isinstance(alpha_hat, CfmParams) else alpha_hat
            inputs["alpha"] = args.alpha
            first = None
        else:
            first = fit_ifm(data, prior, mcmc)
            alpha_hat = first.point
        summary = fit_cfm_stepwise(data, alpha_hat, prior, mcmc)
        if first is not None:
            summary.rhat["alpha"] = first.rhat["alpha"]
            summary.ess["alpha"] = first.ess["alpha"]
            summary.sd["alpha"] = first.sd["alpha"]
    else:
        summary = fit_cfm_joint(data, prior, mcmc)
    diag = {"sd": summary.sd, "rhat": summary.rhat, "ess": summary.ess, "acceptance": summary.acceptance,
            "max_rhat": summary.max_rhat, "converged": summary.converged, **summary.extra}
    config = {"model": args.model, "mcmc": mcmc.to_dict(), "prior": {"shape": prior.shape, "rate": prior.rate}}
    write_params(args.out, summary.point, _provenance(args, seed, config, inputs), diag)
    print(f"{args.model}: max split-R-hat {summary.max_rhat:.4f}; parameters written to {args.out}")
    if summary.max_rhat > RHAT_FAIL and not args.allow_unconverged:
        print(f"error: split-R-hat {summary.max_rhat:.3f} exceeds {RHAT_FAIL}; "
              "rerun with more iterations or pass --allow-unconverged", file=sys.stderr)
        return EXIT_UNCONVERGED
    return EXIT_OK


def _fuse_block(task):
    X, params, mcmc, seed, b = task
    from .sampling import make_rng
    return cfm_posteriors(X[:, 0], X[:, 1], params, mcmc, make_rng(seed, "fuse-block", b))


def fuse_dataset(method: str, X: np.ndarray, params, mcmc: McmcConfig, seed: int, jobs: int = 1):
    """Posteriors for one method; CFM runs in fixed blocks with per-block seeds."""
    if method == "iop":
        return iop_posteriors(X), {}
    if method in ("meta1", "meta2"):
        k = int(method[-1]) - 1
        if X.shape[1] <= k:
            raise ValidationError(f"{method} needs classifier {k + 1} columns in the data")
        ifm = params.ifm if isinstance(params, CfmParams) else params
        return ifm_posteriors(X[:, k:k + 1], ifm.classifier(k)), {}
    if method == "ifm":
        ifm = params.ifm if isinstance(params, CfmParams) else params
        return ifm_posteriors(X, ifm), {}
    blocks = [(X[i:i + FUSE_BLOCK], params, mcmc, seed, b)
              for b, i in enumerate(range(0, X.shape[0], FUSE_BLOCK))]
    results = _map(_fuse_block, blocks, jobs)
    P = np.concatenate([r[0] for r in results])
    diag = {
        "method": np.concatenate([r[1]["method"] for r in results]).tolist(),
        "rhat": np.concatenate([r[1]["rhat"] for r in results]),
        "ess": np.concatenate([r[1]["ess"] for r in results]),
        "acceptance": [a for r in results for a in r[1]["acceptance"]],
    }
    return P, diag


def cmd_fuse(args) -> int:
    seed = _seed(args.seed)
    data = read_dataset(args.data)
    params = None
    inputs = {"data": args.data}
    if args.method != "iop":
        if not args.params:
            raise UsageError(f"--method {args.method} needs --params")
        params = read_params(args.params)
        inputs["params"] = args.params
        if args.method == "cfm" and not isinstance(params, CfmParams):
            raise UsageError("--method cfm needs correlated-model parameters (a params file with delta)")
        if (params.J, ) != (data.J, ) or (args.method in ("ifm", "cfm") and params.K != data.K):
            raise UsageError(f"parameters (K={params.K}, J={params.J}) do not match the data "
                             f"(K={data.K}, J={data.J})")
    mcmc = _mcmc(args.mcmc, seed, fitting=False)
    P, diag = fuse_dataset(args.method, data.outputs, params, mcmc, seed, args.jobs)
    config = {"method": args.method, "mcmc": mcmc.to_dict() if args.method == "cfm" else None}
    prov = _provenance(args, seed, config, inputs)
    prov["data_sha256"] = prov["inputs"]["data"]["sha256"]
    write_fused(args.out, args.method, data.ids, P, data.labels, prov, diag or None)
    print(f"fused {data.I} examples with {args.method}; written to {args.out}")
    return EXIT_OK


_METHOD_NAMES = {"iop": "IOP", "ifm": "IFM", "cfm": "CFM", "meta1": "M1", "meta2": "M2"}


def cmd_eval(args) -> int:
    datasets = {}
    for path in args.data:
        datasets[_sha256(path)] = (path, read_dataset(path))
    runs: dict[str, dict] = {}
    for path in args.fused:
        f = read_fused(path)
        digest = f.provenance.get("data_sha256")
        if digest in datasets:
            dpath, data = datasets[digest]
        elif len(datasets) == 1:
            dpath, data = next(iter(datasets.values()))
        else:
            raise ValidationError(f"{path}: cannot tell which --data file it was fused from")
        if tuple(f.ids) != tuple(data.ids):
            raise ValidationError(f"{path}: example ids do not match {dpath}")
        run = runs.setdefault(f"{path}", {})
        run["data"] = dpath
        run[_METHOD_NAMES.get(f.method, f.method)] = (f.posteriors, data.labels)
    # one run per (fused file); base classifiers once per data file
    run_list = []
    for run in runs.values():
        run_list.append({m: v for m, v in run.items() if m != "data"})
    for dpath, data in datasets.values():
        run_list.append({f"C{k + 1}": (data.outputs[:, k], data.labels) for k in range(data.K)})
    report = ExperimentReport.from_runs(run_list, {"fused": list(args.fused), "data": list(args.data)})
    _write_report(args.out, report, args)
    return EXIT_OK


def _write_report(out, report: ExperimentReport, args, extra: dict | None = None):
    doc = {"format": REPORT_FORMAT, "version": FORMAT_VERSION, **report.to_dict(), **(extra or {})}
    write_json(out, doc)
    atomic_write_text(Path(out).with_suffix(".tsv"), report.tsv())
    print(report.table(), end="")


def _replicate_set(task):
    data, params, mcmc, seed, s = task
    from .evaluation import method_posteriors
    from .sampling import make_rng
    post, diag = method_posteriors(data, params, mcmc, make_rng(seed, "fuse-set", s))
    return {m: (P, data.labels) for m, P in post.items()}, diag


def cmd_replicate(args) -> int:
    seed = _seed(args.seed)
    spec = SimSpec.experiment(args.experiment, args.r, n_test_sets=args.n_test_sets,
                              examples_per_class=args.examples_per_class, seed=seed, n_sim=args.n_sim)
    mcmc = _mcmc(args.mcmc, seed, fitting=False)
    params = true_params(spec)
    sets = generate_dataset(spec, params)
    out = Path(args.out_dir)
    if args.save_data:
        for s, data in enumerate(sets):
            write_dataset(out / "data" / f"set_{s + 1:03d}.csv", data)
    results = _map(_replicate_set, [(d, params, mcmc, seed, s) for s, d in enumerate(sets)], args.jobs)
    report = ExperimentReport.from_runs([r[0] for r in results])
    rhat = np.concatenate([r[1].get("rhat", np.array([])) for r in results])
    finite = rhat[np.isfinite(rhat)]
    report.config = {"spec": spec.to_dict(), "mcmc": mcmc.to_dict()}
    report.seeds = {"seed": seed}
    cfm_diag = {"max_rhat": float(finite.max()) if finite.size else None,
                "frac_rhat_above_1.05": float((finite > 1.05).mean()) if finite.size else 0.0}
    write_params(out / "params.json", params, _provenance(args, seed, spec.to_dict()))
    _write_report(out / "report.json", report, args,
                  {"experiment": args.experiment, "r": args.r, "delta": params.delta, "cfm_diagnostics": cfm_diag})
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="corrfuse", description="Bayesian fusion of probabilistic classifier outputs.")
    p.add_argument("--version", action="version", version=f"corrfuse {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, jobs=False):
        sp.add_argument("--seed", type=int, default=None, help="random seed (default: $CORRFUSE_SEED or 0)")
        if jobs:
            sp.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")

    c = sub.add_parser("calibrate", help="calibrate delta to a correlation level")
    c.add_argument("--alpha", required=True, help="params JSON with K=2 marginals")
    c.add_argument("--r", type=float, required=True)
    c.add_argument("--n-sim", type=int, default=200_000)
    c.add_argument("--out", required=True)
    common(c)

    s = sub.add_parser("simulate", help="generate correlated-model test sets")
    s.add_argument("--spec", required=True, help="simulation spec JSON")
    s.add_argument("--out-dir", required=True)
    common(s)

    f = sub.add_parser("fit", help="infer model parameters from labelled outputs")
    f.add_argument("--model", required=True, choices=["ifm", "cfm-stepwise", "cfm-joint"])
    f.add_argument("--train", required=True)
    f.add_argument("--mcmc", help="MCMC config JSON (McmcConfig fields)")
    f.add_argument("--alpha", help="fixed marginals for cfm-stepwise (default: fit them first)")
    f.add_argument("--prior-shape", type=float, default=1e-3)
    f.add_argument("--prior-rate", type=float, default=1e-3)
    f.add_argument("--allow-unconverged", action="store_true")
    f.add_argument("--out", required=True)
    common(f)

    u = sub.add_parser("fuse", help="fuse classifier outputs")
    u.add_argument("--method", required=True, choices=["iop", "ifm", "cfm", "meta1", "meta2"])
    u.add_argument("--params")
    u.add_argument("--data", required=True)
    u.add_argument("--mcmc")
    u.add_argument("--out", required=True)
    common(u, jobs=True)

    e = sub.add_parser("eval", help="entropy / log-loss report over fused files")
    e.add_argument("--fused", nargs="+", required=True)
    e.add_argument("--data", nargs="+", required=True)
    e.add_argument("--out", required=True)

    r = sub.add_parser("replicate", help="end-to-end simulation experiment with true parameters")
    r.add_argument("--experiment", required=True, choices=["sim1", "sim2"])
    r.add_argument("--r", type=float, required=True)
    r.add_argument("--n-test-sets", type=int, default=25)
    r.add_argument("--examples-per-class", type=int, default=20)
    r.add_argument("--n-sim", type=int, default=200_000)
    r.add_argument("--mcmc")
    r.add_argument("--save-data", action="store_true")
    r.add_argument("--out-dir", required=True)
    common(r, jobs=True)
    return p


COMMANDS = {"calibrate": cmd_calibrate, "simulate": cmd_simulate, "fit": cmd_fit, "fuse": cmd_fuse,
            "eval": cmd_eval, "replicate": cmd_replicate}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CalibrationError, EstimationError, InferenceError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
