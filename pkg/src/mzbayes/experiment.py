"""Monte Carlo harness: calibration-style scans of bias and sensitivity.

Reproduces the measurement protocol: at each true phase, draw ``p``
pulses, (optionally) push them through the detector confusion channel,
accumulate the Bayesian posterior (with fitted retrodictive weights when
noise is configured), and repeat over independent replicas. Each
(phase, replica) pair gets its own seeded stream derived from the master
seed, so serial and parallel execution give identical results.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from mzbayes._version import __version__ as _code_version
from mzbayes.detector import (
    ConfusionModel,
    RetrodictiveWeights,
    apply_noise_counts,
    log_posterior_fit,
    noisy_log_likelihood_grid,
)
from mzbayes.estimators import (
    FringeParams,
    classical_estimate,
    ml_estimate,
    noisy_classical_estimate,
    ymk_sequence_estimate,
)
from mzbayes.photon_model import InterferometerModel, Outcome
from mzbayes.posterior import (
    PhaseGrid,
    Posterior,
    credible_interval,
    posterior_mean,
)

ESTIMATOR_NAMES = ("bayes", "ml", "classical", "fringe", "ymk")


def default_theta_grid() -> np.ndarray:
    """19 phases theta/pi in {0.05, 0.10, ..., 0.95}."""
    return np.pi * np.linspace(0.05, 0.95, 19)


@dataclass(frozen=True)
class ExperimentPlan:
    """One scan: true phases, shots per estimation, replicas, and seeding."""

    theta_grid: np.ndarray = field(default_factory=default_theta_grid)
    p: int = 1000
    replicas: int = 150
    seed: int = 0
    nbar: float = 1.08
    ideal_n_max: int = 25
    grid_points: int = 4096
    noise: ConfusionModel | None = None
    weights: RetrodictiveWeights | None = None
    fringe: FringeParams | None = None
    estimators: tuple[str, ...] = ("bayes",)

    def __post_init__(self) -> None:
        thetas = np.asarray(self.theta_grid, dtype=float)
        if thetas.ndim != 1 or thetas.size < 1:
            raise ValueError("theta_grid must be a non-empty 1-D array")
        if np.any(thetas < 0.0) or np.any(thetas > np.pi):
            raise ValueError("theta_grid must lie in [0, pi]")
        thetas = thetas.copy()
        thetas.flags.writeable = False
        object.__setattr__(self, "theta_grid", thetas)
        if self.p < 1:
            raise ValueError(f"need p >= 1, got {self.p}")
        if self.replicas < 1:
            raise ValueError(f"need replicas >= 1, got {self.replicas}")
        if not self.nbar > 0:
            raise ValueError(f"nbar must be > 0, got {self.nbar}")
        unknown = set(self.estimators) - set(ESTIMATOR_NAMES)
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")
        if self.noise is not None and self.weights is None:
            raise ValueError("a noise model requires fitted retrodictive weights")

    @property
    def model(self) -> InterferometerModel:
        return InterferometerModel(nbar=self.nbar, n_max=self.ideal_n_max)

    @property
    def phase_grid(self) -> PhaseGrid:
        return PhaseGrid(self.grid_points)

    def manifest(self) -> dict:
        return {
            "code_version": _code_version,
            "theta_grid_pi": [t / math.pi for t in self.theta_grid],
            "p": self.p,
            "replicas": self.replicas,
            "seed": self.seed,
            "nbar": self.nbar,
            "ideal_n_max": self.ideal_n_max,
            "grid_points": self.grid_points,
            "noise": self.noise is not None,
            "estimators": list(self.estimators),
        }


def replica_rng(seed: int, phase_idx: int, replica_idx: int) -> np.random.Generator:
    """Independent stream for one (phase, replica) cell of a scan."""
    return np.random.default_rng([seed, phase_idx, replica_idx])


class _PosteriorEngine:
    """Caches per-measured-pair log densities for fast accumulation."""

    def __init__(self, plan: ExperimentPlan):
        self.plan = plan
        self.grid = plan.phase_grid
        nodes = self.grid.nodes
        with np.errstate(divide="ignore"):
            self._log_cos = np.log(np.cos(nodes / 2.0))
            self._log_sin = np.log(np.sin(nodes / 2.0))
        self._pair_cache: dict[tuple[int, int], np.ndarray] = {}
        if plan.noise is not None:
            self._ml_loglik = noisy_log_likelihood_grid(plan.noise, plan.model)
        else:
            self._ml_loglik = plan.model.log_likelihood_grid

    @property
    def ml_log_likelihood(self):
        return self._ml_loglik

    def _pair_log_density(self, nc: int, nd: int) -> np.ndarray:
        key = (nc, nd)
        cached = self._pair_cache.get(key)
        if cached is None:
            cached = log_posterior_fit(
                Outcome(nc, nd), self.plan.weights, self.grid.nodes
            )
            self._pair_cache[key] = cached
        return cached

    def posterior(self, n_c: np.ndarray, n_d: np.ndarray) -> Posterior:
        if self.plan.weights is None:
            # Guard zero totals: 0 * (-inf) at the endpoints would poison
            # the whole density with NaNs.
            log_density = np.zeros(self.grid.n_points)
            total_c, total_d = int(n_c.sum()), int(n_d.sum())
            if total_c:
                log_density = log_density + 2.0 * total_c * self._log_cos
            if total_d:
                log_density = log_density + 2.0 * total_d * self._log_sin
        else:
            pairs = np.stack([n_c, n_d], axis=1)
            unique, counts = np.unique(pairs, axis=0, return_counts=True)
            log_density = np.zeros(self.grid.n_points)
            for (nc, nd), count in zip(unique, counts):
                log_density = log_density + count * self._pair_log_density(
                    int(nc), int(nd)
                )
        return Posterior.from_log_density(self.grid, log_density)


def _sample_measured(
    theta: float, plan: ExperimentPlan, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    n_c, n_d = plan.model.sample_counts(theta, plan.p, rng)
    if plan.noise is not None:
        n_c, n_d = apply_noise_counts(n_c, n_d, plan.noise, rng)
    return n_c, n_d


def run_estimation(
    theta: float,
    plan: ExperimentPlan,
    rng: np.random.Generator,
    _engine: _PosteriorEngine | None = None,
) -> tuple[float, float]:
    """One phase estimation: p pulses, accumulated posterior, (mean, dtheta)."""
    engine = _engine if _engine is not None else _PosteriorEngine(plan)
    n_c, n_d = _sample_measured(theta, plan, rng)
    post = engine.posterior(n_c, n_d)
    return posterior_mean(post), credible_interval(post)


@dataclass(frozen=True)
class ScanRecord:
    """Replica-aggregated statistics for one (phase, estimator) cell.

    ``mean_dtheta``/``sd_dtheta`` are NaN for estimators without a
    per-estimation uncertainty; ``sd_est`` is NaN for a single replica
    (degenerate record).
    """

    theta: float
    estimator: str
    mean_est: float
    bias: float
    mean_dtheta: float
    sd_est: float
    sd_dtheta: float


@dataclass(frozen=True)
class ScanResult:
    records: tuple[ScanRecord, ...]
    plan: ExperimentPlan

    def record(self, theta: float, estimator: str) -> ScanRecord:
        for rec in self.records:
            if rec.estimator == estimator and math.isclose(rec.theta, theta):
                return rec
        raise KeyError(f"no record for theta={theta}, estimator={estimator}")

    def write_csv(self, path) -> None:
        """Export records (theta in units of pi)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "theta",
                    "estimator",
                    "mean_est",
                    "bias",
                    "mean_dtheta",
                    "sd_est",
                    "sd_dtheta",
                ]
            )
            for rec in self.records:
                writer.writerow(
                    [
                        f"{rec.theta / math.pi:.12g}",
                        rec.estimator,
                        f"{rec.mean_est:.12g}",
                        f"{rec.bias:.12g}",
                        f"{rec.mean_dtheta:.12g}",
                        f"{rec.sd_est:.12g}",
                        f"{rec.sd_dtheta:.12g}",
                    ]
                )

    def write_manifest(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.plan.manifest(), fh, indent=2)
            fh.write("\n")


def _replica_estimates(
    theta: float, plan: ExperimentPlan, engine: _PosteriorEngine, rng
) -> dict[str, tuple[float, float]]:
    """Estimates (value, dtheta-or-NaN) of every requested estimator."""
    n_c, n_d = _sample_measured(theta, plan, rng)
    outcomes = None
    results: dict[str, tuple[float, float]] = {}
    for name in plan.estimators:
        if name == "bayes":
            post = engine.posterior(n_c, n_d)
            results[name] = (posterior_mean(post), credible_interval(post))
            continue
        if outcomes is None:
            outcomes = [Outcome(int(c), int(d)) for c, d in zip(n_c, n_d)]
        if name == "ml":
            est = ml_estimate(outcomes, engine.ml_log_likelihood, engine.grid)
            results[name] = (est.phase, math.nan)
        elif name == "classical":
            results[name] = (classical_estimate(outcomes, plan.nbar), math.nan)
        elif name == "fringe":
            params = plan.fringe or FringeParams(a=0.0, b=0.0, amplitude=plan.nbar)
            results[name] = (noisy_classical_estimate(outcomes, params), math.nan)
        elif name == "ymk":
            results[name] = (ymk_sequence_estimate(outcomes), math.nan)
    return results


def _aggregate(theta: float, estimator: str, values, dthetas) -> ScanRecord:
    values = np.asarray(values)
    dthetas = np.asarray(dthetas)
    sd_est = float(np.std(values, ddof=1)) if values.size > 1 else math.nan
    finite_dt = dthetas[np.isfinite(dthetas)]
    mean_dt = float(np.mean(finite_dt)) if finite_dt.size else math.nan
    sd_dt = float(np.std(finite_dt, ddof=1)) if finite_dt.size > 1 else math.nan
    mean_est = float(np.mean(values))
    return ScanRecord(
        theta=theta,
        estimator=estimator,
        mean_est=mean_est,
        bias=mean_est - theta,
        mean_dtheta=mean_dt,
        sd_est=sd_est,
        sd_dtheta=sd_dt,
    )


def _run_scan(plan: ExperimentPlan) -> ScanResult:
    engine = _PosteriorEngine(plan)
    records: list[ScanRecord] = []
    for phase_idx, theta in enumerate(plan.theta_grid):
        per_estimator: dict[str, tuple[list[float], list[float]]] = {
            name: ([], []) for name in plan.estimators
        }
        for replica_idx in range(plan.replicas):
            rng = replica_rng(plan.seed, phase_idx, replica_idx)
            for name, (value, dtheta) in _replica_estimates(
                theta, plan, engine, rng
            ).items():
                per_estimator[name][0].append(value)
                per_estimator[name][1].append(dtheta)
        for name in plan.estimators:
            values, dthetas = per_estimator[name]
            records.append(_aggregate(float(theta), name, values, dthetas))
    return ScanResult(records=tuple(records), plan=plan)


def bias_scan(plan: ExperimentPlan) -> ScanResult:
    """Replica scan emphasizing |mean estimate - theta| against scatter."""
    return _run_scan(plan)


def sensitivity_scan(plan: ExperimentPlan) -> ScanResult:
    """Replica scan emphasizing sqrt(p) * dtheta against the CRLB."""
    return _run_scan(plan)


def load_outcomes_csv(path) -> list[Outcome]:
    """Read recorded pulses from a ``pulse_index,nc,nd`` CSV file."""
    outcomes = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["pulse_index", "nc", "nd"]:
            raise ValueError(
                f"expected header pulse_index,nc,nd in {path}, got {reader.fieldnames}"
            )
        for row in reader:
            outcomes.append(Outcome(int(row["nc"]), int(row["nd"])))
    return outcomes
