"""Bayesian phase estimation for a coherent-light Mach-Zehnder interferometer.

Simulates photon-number-resolving detection at the two output ports,
grid-based Bayesian phase inference, detector confusion calibration, and
Monte Carlo scans of estimator bias and sensitivity against the
Cramer-Rao bound.
"""

from mzbayes._version import __version__
from mzbayes.photon_model import InterferometerModel, Outcome, PhaseDomainError
from mzbayes.posterior import (
    DegenerateEvidenceError,
    PhaseGrid,
    Posterior,
    accumulate,
    credible_interval,
    normalization_constant,
    posterior_mean,
    single_shot_posterior,
)
from mzbayes.detector import (
    CalibrationData,
    ConfusionModel,
    FitError,
    RetrodictiveWeights,
    apply_noise,
    fit_retrodictive_weights,
    noisy_joint_likelihood,
    posterior_fit,
    simulate_calibration,
)
from mzbayes.estimators import (
    FringeParams,
    MLEstimate,
    classical_estimate,
    classical_uncertainty,
    fit_fringe,
    ml_estimate,
    noisy_classical_estimate,
    ymk_estimate,
    ymk_sequence_estimate,
)
from mzbayes.fisher import crlb, fisher_ideal, fisher_numeric
from mzbayes.experiment import (
    ExperimentPlan,
    ScanRecord,
    ScanResult,
    bias_scan,
    default_theta_grid,
    run_estimation,
    sensitivity_scan,
)

__all__ = [
    "InterferometerModel",
    "Outcome",
    "PhaseDomainError",
    "PhaseGrid",
    "Posterior",
    "DegenerateEvidenceError",
    "single_shot_posterior",
    "normalization_constant",
    "accumulate",
    "posterior_mean",
    "credible_interval",
    "ConfusionModel",
    "RetrodictiveWeights",
    "CalibrationData",
    "FitError",
    "apply_noise",
    "noisy_joint_likelihood",
    "simulate_calibration",
    "fit_retrodictive_weights",
    "posterior_fit",
    "FringeParams",
    "MLEstimate",
    "classical_estimate",
    "classical_uncertainty",
    "fit_fringe",
    "noisy_classical_estimate",
    "ymk_estimate",
    "ymk_sequence_estimate",
    "ml_estimate",
    "fisher_ideal",
    "fisher_numeric",
    "crlb",
    "ExperimentPlan",
    "ScanRecord",
    "ScanResult",
    "run_estimation",
    "bias_scan",
    "sensitivity_scan",
    "default_theta_grid",
]
