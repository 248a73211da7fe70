"""How the three fusion rules treat the same pair of classifier outputs.

Two classifiers both report x = (0.6, 0.2, 0.2) for a three-class problem.
Independent pooling and the independent Dirichlet model both treat the two
reports as separate evidence and become more confident than either
classifier. The correlated model interpolates: with no correlation it agrees
with the independent model, and with perfect correlation the second report
adds nothing, so the fused output equals a single calibrated classifier.

Run:  python3 demos/fusion_rules.py
"""

import numpy as np

from corrfuse import IfmParams, McmcConfig, calibrate_params, entropy, fuse_cfm, fuse_ifm, fuse_iop, make_rng
from corrfuse import meta_classify, structured_alpha

x = np.array([0.6, 0.2, 0.2])
configs = {
    "precision 1 (rows 3,2,2)": structured_alpha(3, 2.0, 1.0),
    "precision 2 (rows 4,2,2)": structured_alpha(3, 2.0, 2.0),
}


def show(label, probs):
    print(f"  {label:<22}" + "  ".join(f"{p:.4f}" for p in probs) + f"   H = {entropy(probs):.4f}")


for name, rows in configs.items():
    ifm = IfmParams(np.stack([rows, rows]))
    print(f"\nMarginal model: {name}")
    show("input x", x)
    show("IOP", fuse_iop([x, x]).posterior.probs)
    show("IFM", fuse_ifm([x, x], ifm).posterior.probs)
    show("single classifier", meta_classify(x, ifm.classifier(0)).posterior.probs)
    for r in (0.0, 0.25, 0.5, 0.75, 1.0):
        # delta is chosen so the simulated mean Pearson correlation is r
        params = calibrate_params(ifm, r, n_sim=50_000, seed=0)
        res = fuse_cfm([x, x], params, McmcConfig(n_chains=2, n_iter=12000, n_burnin=2000),
                       make_rng(0, "demo", r))
        show(f"CFM r = {r:.2f}", res.posterior.probs)
