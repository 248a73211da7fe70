"""Learn a fusion model from labelled outputs, then fuse a held-out set.

1. Simulate training and test pairs from a known correlated model.
2. Fit the marginals with the independent model, then the correlation
   parameters with the marginals held fixed (the step-wise procedure).
3. Fuse the test set with each rule and compare mean log-loss.

Short chains keep this to about a minute; the library defaults are longer.

Run:  python3 demos/fit_then_fuse.py
"""

import numpy as np

from corrfuse import IfmParams, McmcConfig, calibrate_params, fit_cfm_stepwise, fit_ifm, make_rng
from corrfuse.datagen import SIM1_ROWS, sample_cfm_dataset
from corrfuse.evaluation import ExperimentReport, method_posteriors

rows = np.array(SIM1_ROWS)
truth = calibrate_params(IfmParams(np.stack([rows, rows])), 0.5, n_sim=50_000, seed=1)
train = sample_cfm_dataset(truth, 300, make_rng(1, "train"))
test = sample_cfm_dataset(truth, 200, make_rng(1, "test"))
print("true delta:\n", np.round(truth.delta, 3))

short = McmcConfig(n_chains=2, n_iter=4000, n_burnin=1000, seed=1)
alpha_fit = fit_ifm(train, mcmc=short)
print(f"\nIFM fit, max split-R-hat {alpha_fit.max_rhat:.3f}")
print(np.round(alpha_fit.point.alpha, 2))

delta_fit = fit_cfm_stepwise(train, alpha_fit.point, mcmc=short)
print(f"\nstep-wise CFM fit, max split-R-hat {delta_fit.max_rhat:.3f}")
print(np.round(delta_fit.point.delta, 3))

post, _ = method_posteriors(test, delta_fit.point, McmcConfig(n_chains=2, n_iter=3000, n_burnin=500),
                            make_rng(1, "fuse"))
report = ExperimentReport.from_runs([{m: (P, test.labels) for m, P in post.items()}])
print("\nheld-out performance (one test set, so no spread):")
print(report.table())
