"""Map a target output correlation r to the correlation parameter delta.

For each class the shared Gamma shape is delta = c * min(alpha1, alpha2).
Calibration finds the c whose simulated mean Pearson correlation between the
two classifiers' outputs equals r. Feeding fresh samples to the measurement
routine closes the loop.

Run:  python3 demos/correlation_calibration.py
"""

import numpy as np

from corrfuse import IfmParams, calibrate_params, make_rng, measure_correlation
from corrfuse.calibration import CalibrationError
from corrfuse.datagen import SIM1_ROWS, sample_cfm_dataset

rows = np.array(SIM1_ROWS)
ifm = IfmParams(np.stack([rows, rows]))
print(f"{'target r':>9}{'c (class 1)':>13}{'measured r':>12}")
for r in (0.0, 0.25, 0.5, 0.75, 1.0):
    params = calibrate_params(ifm, r, n_sim=50_000, seed=2)
    c = params.delta[0, 0] / rows[0, 0]
    fresh = sample_cfm_dataset(params, 10_000, make_rng(2, "fresh", r))
    print(f"{r:>9.2f}{c:>13.4f}{measure_correlation(fresh).mean:>12.4f}")

# Unequal marginals cannot be perfectly correlated; the error reports the ceiling.
uneven = IfmParams(np.stack([rows, 3 * rows]))
try:
    calibrate_params(uneven, 0.95, n_sim=50_000)
except CalibrationError as err:
    print(f"\nunequal marginals: {err}")
