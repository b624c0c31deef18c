"""Shared fixtures.

The expensive Monte Carlo artifacts (ideal 17-phase scan, noisy
calibration + scan bundle) are session-scoped so the acceptance criteria
and the module tests share one computation.
"""

import numpy as np
import pytest

from mzbayes.detector import (
    ConfusionModel,
    fit_retrodictive_weights,
    simulate_calibration,
)
from mzbayes.experiment import ExperimentPlan, bias_scan, sensitivity_scan
from mzbayes.photon_model import InterferometerModel
from mzbayes.posterior import PhaseGrid

MASTER_SEED = 7
NBAR = 1.08
PULSES = 1000
REPLICAS = 150


@pytest.fixture(scope="session")
def grid():
    return PhaseGrid()


@pytest.fixture(scope="session")
def ideal_model():
    return InterferometerModel(nbar=NBAR)


@pytest.fixture(scope="session")
def regime():
    return ConfusionModel.paper_regime()


@pytest.fixture(scope="session")
def ideal_scan(ideal_model):
    """17-phase ideal scan, Bayes + classical, 150 x p=1000."""
    plan = ExperimentPlan(
        theta_grid=np.pi * np.linspace(0.1, 0.9, 17),
        p=PULSES,
        replicas=REPLICAS,
        seed=MASTER_SEED,
        nbar=ideal_model.nbar,
        estimators=("bayes", "classical"),
    )
    return sensitivity_scan(plan)


@pytest.fixture(scope="session")
def noisy_calibration(regime, ideal_model):
    """Calibration under the default noisy regime: 33 phases x 200k pulses."""
    rng = np.random.default_rng([MASTER_SEED, 0xCA11])
    phases = np.pi * np.linspace(0.02, 0.98, 33)
    return simulate_calibration(phases, 200_000, regime, ideal_model, rng)


@pytest.fixture(scope="session")
def fitted_weights(noisy_calibration, ideal_model):
    return fit_retrodictive_weights(noisy_calibration, ideal_model)


@pytest.fixture(scope="session")
def noisy_scan(regime, fitted_weights, ideal_model):
    """Bayes + YMK scan under the noisy regime, edges included."""
    plan = ExperimentPlan(
        theta_grid=np.pi * np.array([0.02, 0.1, 0.25, 0.5, 0.75, 0.9, 0.98]),
        p=PULSES,
        replicas=REPLICAS,
        seed=MASTER_SEED,
        nbar=ideal_model.nbar,
        noise=regime,
        weights=fitted_weights,
        estimators=("bayes", "ymk"),
    )
    return bias_scan(plan)
