"""Bayesian fusion of probabilistic classifier outputs.

Three fusion rules are provided: the independent opinion pool, the
independent fusion model (per-class Dirichlet likelihoods, analytic
posterior) and the correlated fusion model (a correlated Dirichlet joint
likelihood, posterior by MCMC over latent class and shared components).
"""

__version__ = "0.1.0"

from .calibration import CalibrationError, CorrelationProfile, calibrate_delta, calibrate_params, measure_correlation
from .core import (
    EPS, CfmParams, IfmParams, LabeledDataset, LabeledExample, Simplex, ValidationError, entropy, log_loss,
    make_simplex,
)
from .datagen import SIM1_ROWS, SIM2_ROWS, SimSpec, experiment_alpha, generate_dataset, structured_alpha
from .dataio import SplitSpec, odds_to_simplex, read_dataset, read_params, split_dataset, write_dataset, write_params
from .density import (
    AugmentedLatents, EstimationError, estimate_log_likelihood, log_augmented_joint, log_dirichlet_pdf,
    log_gamma_pdf, log_likelihood_quadrature,
)
from .evaluation import ExperimentReport
from .fusion import FusionResult, cfm_posteriors, fuse_cfm, fuse_ifm, fuse_iop, meta_classify
from .inference import GammaPrior, InferenceError, fit_cfm_joint, fit_cfm_stepwise, fit_ifm
from .mcmc import McmcConfig, PosteriorSummary
from .sampling import (
    CorrelatedPair, RngState, make_rng, sample_class, sample_correlated_dirichlet, sample_dirichlet,
    sample_gamma,
)

__all__ = [
    "AugmentedLatents", "CalibrationError", "CfmParams", "CorrelatedPair", "CorrelationProfile", "EPS",
    "EstimationError", "ExperimentReport", "FusionResult", "GammaPrior", "IfmParams", "InferenceError",
    "LabeledDataset", "LabeledExample", "McmcConfig", "PosteriorSummary", "RngState", "SIM1_ROWS", "SIM2_ROWS",
    "SimSpec", "Simplex", "SplitSpec", "ValidationError", "calibrate_delta", "calibrate_params",
    "cfm_posteriors", "entropy", "estimate_log_likelihood", "experiment_alpha", "fit_cfm_joint",
    "fit_cfm_stepwise", "fit_ifm", "fuse_cfm", "fuse_ifm", "fuse_iop", "generate_dataset",
    "log_augmented_joint", "log_dirichlet_pdf", "log_gamma_pdf", "log_likelihood_quadrature", "log_loss",
    "make_rng", "make_simplex", "measure_correlation", "meta_classify", "odds_to_simplex", "read_dataset",
    "read_params", "sample_class", "sample_correlated_dirichlet", "sample_dirichlet", "sample_gamma",
    "split_dataset", "structured_alpha", "write_dataset", "write_params",
]
