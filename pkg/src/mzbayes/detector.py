"""Photon-number-resolving detector imperfections.

Each port has an independent forward confusion matrix K[m, t]: the
probability of reporting m photons when t were present, with true counts
above ``n_max`` folded into the ``n_max`` column (the amplifiers cap the
resolvable count). Calibration runs at known phases let us fit the
retrodictive weights P(true pair | measured pair) that turn the ideal
closed-form posteriors into posteriors for the real instrument.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from mzbayes.photon_model import InterferometerModel, Outcome, _log_poisson_pmf
from mzbayes.posterior import (
    PhaseGrid,
    Posterior,
    log_shape,
    normalization_constant,
)

_COLUMN_TOL = 1e-12

# Per-count report fidelity for the default noisy regime: each true count t
# is reported correctly with probability _REGIME_FIDELITY[t], otherwise read
# one photon low. Chosen so the phase-averaged retrodictive diagonals for
# measured (0,0), (0,1), (1,1), (0,2) approximate the 0.54/0.67/0.67/0.87
# working point, with (0,0) the worst pair overall.
_REGIME_FIDELITY = (1.0, 0.30303653, 0.76134587, 0.94439556, 0.78775097)


class CalibrationError(ValueError):
    """Invalid calibration request."""


class FitError(RuntimeError):
    """Retrodictive-weight or fringe fit could not be carried out."""


def _validate_forward(K: np.ndarray, n_max: int, name: str) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    if K.shape != (n_max + 1, n_max + 1):
        raise ValueError(f"{name} must be {(n_max + 1, n_max + 1)}, got {K.shape}")
    if np.any(K < 0.0) or np.any(K > 1.0):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    col_sums = K.sum(axis=0)
    if np.any(np.abs(col_sums - 1.0) > _COLUMN_TOL):
        raise ValueError(f"{name} columns must sum to 1, got {col_sums}")
    K = K.copy()
    K.flags.writeable = False
    return K


@dataclass(frozen=True)
class ConfusionModel:
    """Per-port forward misread matrices K[measured, true], truncated at n_max."""

    forward_c: np.ndarray
    forward_d: np.ndarray
    n_max: int = 4

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "forward_c", _validate_forward(self.forward_c, self.n_max, "forward_c")
        )
        object.__setattr__(
            self, "forward_d", _validate_forward(self.forward_d, self.n_max, "forward_d")
        )

    @classmethod
    def identity(cls, n_max: int = 4) -> "ConfusionModel":
        eye = np.eye(n_max + 1)
        return cls(forward_c=eye, forward_d=eye, n_max=n_max)

    @classmethod
    def paper_regime(cls, n_max: int = 4) -> "ConfusionModel":
        """Default synthetic noisy regime (both ports share one matrix)."""
        K = np.zeros((n_max + 1, n_max + 1))
        K[0, 0] = 1.0
        for t in range(1, n_max + 1):
            g = _REGIME_FIDELITY[min(t, len(_REGIME_FIDELITY) - 1)]
            K[t, t] = g
            K[t - 1, t] = 1.0 - g
        return cls(forward_c=K, forward_d=K, n_max=n_max)

    def is_identity(self) -> bool:
        eye = np.eye(self.n_max + 1)
        return bool(
            np.array_equal(self.forward_c, eye) and np.array_equal(self.forward_d, eye)
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_max": self.n_max,
                "forward_c": self.forward_c.tolist(),
                "forward_d": self.forward_d.tolist(),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "ConfusionModel":
        obj = json.loads(text)
        return cls(
            forward_c=np.array(obj["forward_c"]),
            forward_d=np.array(obj["forward_d"]),
            n_max=int(obj["n_max"]),
        )


def _apply_port(
    counts: np.ndarray, K: np.ndarray, n_max: int, rng: np.random.Generator
) -> np.ndarray:
    folded = np.minimum(counts, n_max)
    out = np.empty_like(folded)
    for t in range(n_max + 1):
        mask = folded == t
        n = int(mask.sum())
        if n:
            out[mask] = rng.choice(n_max + 1, size=n, p=K[:, t])
    return out


def apply_noise(
    true_outcome: Outcome, model: ConfusionModel, rng: np.random.Generator
) -> Outcome:
    """Push one true outcome through the misread channel (port c first)."""
    n_c = int(
        rng.choice(model.n_max + 1, p=model.forward_c[:, min(true_outcome.n_c, model.n_max)])
    )
    n_d = int(
        rng.choice(model.n_max + 1, p=model.forward_d[:, min(true_outcome.n_d, model.n_max)])
    )
    return Outcome(n_c, n_d)


def apply_noise_counts(
    n_c: np.ndarray,
    n_d: np.ndarray,
    model: ConfusionModel,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized misread channel for arrays of per-pulse counts."""
    return (
        _apply_port(n_c, model.forward_c, model.n_max, rng),
        _apply_port(n_d, model.forward_d, model.n_max, rng),
    )


def _folded_poisson(mu: float, ideal_n_max: int, n_max: int) -> np.ndarray:
    """Poisson pmf over true counts 0..ideal_n_max folded into 0..n_max bins."""
    t = np.arange(ideal_n_max + 1)
    p = np.exp(_log_poisson_pmf(t, mu))
    folded = np.zeros(n_max + 1)
    np.add.at(folded, np.minimum(t, n_max), p)
    return folded


def measured_port_distributions(
    phi: float, model: ConfusionModel, ideal: InterferometerModel
) -> tuple[np.ndarray, np.ndarray]:
    """Distributions of the reported counts at each port for phase ``phi``."""
    mu_c, mu_d = ideal.output_means(phi)
    dist_c = model.forward_c @ _folded_poisson(mu_c, ideal.n_max, model.n_max)
    dist_d = model.forward_d @ _folded_poisson(mu_d, ideal.n_max, model.n_max)
    return dist_c, dist_d


def noisy_joint_likelihood(
    phi: float, measured: Outcome, model: ConfusionModel, ideal: InterferometerModel
) -> float:
    """P_fit(Nc, Nd | phi): ideal Poisson pair pushed through both channels.

    The misreads at the two ports are independent, so the double sum over
    true pairs factorizes into one folded sum per port. The ``n_max`` bin
    aggregates the folded tail of true counts above ``n_max``.
    """
    if measured.n_c > model.n_max or measured.n_d > model.n_max:
        raise ValueError(
            f"measured counts {measured} exceed the reportable maximum {model.n_max}"
        )
    dist_c, dist_d = measured_port_distributions(phi, model, ideal)
    return float(dist_c[measured.n_c] * dist_d[measured.n_d])


def noisy_joint_pmf(model: ConfusionModel, ideal: InterferometerModel):
    """Callable phi -> joint pmf matrix over measured pairs {0..n_max}^2."""

    def pmf(phi: float) -> np.ndarray:
        dist_c, dist_d = measured_port_distributions(phi, model, ideal)
        return np.outer(dist_c, dist_d)

    return pmf


def noisy_log_likelihood_grid(model: ConfusionModel, ideal: InterferometerModel):
    """Callable (phis, outcome) -> log P_fit(outcome | phi) over an array."""

    def log_lik(phis: np.ndarray, outcome: Outcome) -> np.ndarray:
        phis = np.atleast_1d(np.asarray(phis, dtype=float))
        out = np.empty_like(phis)
        for i, phi in enumerate(phis):
            dist_c, dist_d = measured_port_distributions(phi, model, ideal)
            out[i] = dist_c[outcome.n_c] * dist_d[outcome.n_d]
        with np.errstate(divide="ignore"):
            return np.log(out)

    return log_lik


@dataclass(frozen=True)
class CalibrationData:
    """Measured-count histograms collected at known phases."""

    phases: np.ndarray
    pulses_per_phase: int
    counts: np.ndarray  # (n_phases, n_max+1, n_max+1)

    @property
    def n_max(self) -> int:
        return self.counts.shape[1] - 1

    def mean_difference(self) -> np.ndarray:
        """Per-phase empirical mean of (n_c - n_d), for fringe fitting."""
        nc = np.arange(self.n_max + 1)
        diff = nc[:, None] - nc[None, :]
        return (self.counts * diff).sum(axis=(1, 2)) / self.pulses_per_phase

    def empirical_phase_curve(self, n_c: int, n_d: int) -> np.ndarray:
        """Empirical P(phi | Nc, Nd) across the calibration phases.

        Bayes inversion with a flat prior and equal pulse budgets reduces to
        normalizing the per-phase frequencies of the pair as a density.
        """
        y = self.counts[:, n_c, n_d].astype(float)
        norm = np.trapezoid(y, self.phases)
        if norm == 0.0:
            raise FitError(f"pair ({n_c},{n_d}) never observed in calibration")
        return y / norm

    def write_csv(self, path) -> None:
        """Export histograms as ``phi,nc,nd,count`` rows (phi in units of pi)."""
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["phi", "nc", "nd", "count"])
            for j, phi in enumerate(self.phases):
                for nc in range(self.n_max + 1):
                    for nd in range(self.n_max + 1):
                        writer.writerow(
                            [f"{phi / np.pi:.12g}", nc, nd, int(self.counts[j, nc, nd])]
                        )


def simulate_calibration(
    phases: Sequence[float],
    pulses_per_phase: int,
    model: ConfusionModel,
    ideal: InterferometerModel,
    rng: np.random.Generator,
) -> CalibrationData:
    """Simulate a calibration run: known phases, many pulses, noisy readout.

    Each phase gets an independent child stream of ``rng``, so the result
    does not depend on the order phases are processed in.
    """
    phases = np.asarray(phases, dtype=float)
    if pulses_per_phase < 1:
        raise CalibrationError(f"need >= 1 pulse per phase, got {pulses_per_phase}")
    if np.any(phases < 0.0) or np.any(phases > np.pi):
        raise CalibrationError("calibration phases must lie in [0, pi]")
    n_bins = model.n_max + 1
    counts = np.zeros((len(phases), n_bins, n_bins), dtype=np.int64)
    streams = rng.spawn(len(phases))
    for j, (phi, stream) in enumerate(zip(phases, streams)):
        n_c, n_d = ideal.sample_counts(phi, pulses_per_phase, stream)
        n_c, n_d = apply_noise_counts(n_c, n_d, model, stream)
        hist = np.zeros((n_bins, n_bins), dtype=np.int64)
        np.add.at(hist, (n_c, n_d), 1)
        counts[j] = hist
    return CalibrationData(
        phases=phases, pulses_per_phase=pulses_per_phase, counts=counts
    )


@dataclass(frozen=True)
class RetrodictiveWeights:
    """P(true pair | measured pair), one distribution per measured pair.

    ``table[nc, nd]`` is the (n_max+1, n_max+1) distribution over true
    pairs given measured counts (nc, nd).
    """

    table: np.ndarray  # (n_max+1, n_max+1, n_max+1, n_max+1)
    n_max: int = 4

    def __post_init__(self) -> None:
        shape = (self.n_max + 1,) * 4
        table = np.asarray(self.table, dtype=float)
        if table.shape != shape:
            raise ValueError(f"weights table must be {shape}, got {table.shape}")
        if np.any(table < 0.0):
            raise ValueError("weights must be non-negative")
        sums = table.sum(axis=(2, 3))
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError("each retrodictive distribution must sum to 1")
        table = table.copy()
        table.flags.writeable = False
        object.__setattr__(self, "table", table)

    @classmethod
    def identity(cls, n_max: int = 4) -> "RetrodictiveWeights":
        table = np.zeros((n_max + 1,) * 4)
        for nc in range(n_max + 1):
            for nd in range(n_max + 1):
                table[nc, nd, nc, nd] = 1.0
        return cls(table=table, n_max=n_max)

    def distribution(self, n_c: int, n_d: int) -> np.ndarray:
        return self.table[n_c, n_d]

    def diagonal(self, n_c: int, n_d: int) -> float:
        """P(true == measured) for a measured pair."""
        return float(self.table[n_c, n_d, n_c, n_d])

    def worst_diagonal(self) -> tuple[float, tuple[int, int]]:
        worst, arg = np.inf, (0, 0)
        for nc in range(self.n_max + 1):
            for nd in range(self.n_max + 1):
                d = self.diagonal(nc, nd)
                if d < worst:
                    worst, arg = d, (nc, nd)
        return worst, arg

    def to_json(self) -> str:
        weights = {}
        for nc in range(self.n_max + 1):
            for nd in range(self.n_max + 1):
                dist = {}
                for tc in range(self.n_max + 1):
                    for td in range(self.n_max + 1):
                        w = self.table[nc, nd, tc, td]
                        if w > 0.0:
                            dist[f"({tc},{td})"] = w
                weights[f"({nc},{nd})"] = dist
        return json.dumps({"n_max": self.n_max, "weights": weights}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RetrodictiveWeights":
        obj = json.loads(text)
        n_max = int(obj["n_max"])
        table = np.zeros((n_max + 1,) * 4)
        for meas, dist in obj["weights"].items():
            nc, nd = (int(s) for s in meas.strip("()").split(","))
            for true, w in dist.items():
                tc, td = (int(s) for s in true.strip("()").split(","))
                table[nc, nd, tc, td] = float(w)
        return cls(table=table, n_max=n_max)


def _em_port_confusion(
    observed_counts: np.ndarray,
    true_dists: np.ndarray,
    max_iter: int = 5000,
    tol: float = 1e-13,
) -> np.ndarray:
    """Maximum-likelihood K for one port by EM over the latent true counts.

    ``observed_counts[j, m]`` are per-phase histogram counts of the
    reported value; ``true_dists[j, t]`` the known (folded Poisson)
    distribution of the true count at phase j. Column stochasticity is
    preserved by the M-step.
    """
    n_bins = observed_counts.shape[1]
    K = 0.5 * np.eye(n_bins) + 0.5 / n_bins
    K /= K.sum(axis=0)
    for _ in range(max_iter):
        joint = K[None, :, :] * true_dists[:, None, :]  # [phase, m, t]
        p_m = joint.sum(axis=2, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            resp = np.nan_to_num(joint / p_m)
        K_new = (observed_counts[:, :, None] * resp).sum(axis=0)
        col_sums = K_new.sum(axis=0)
        if np.any(col_sums <= 0.0):
            raise FitError("degenerate confusion fit: unpopulated true count")
        K_new /= col_sums
        if np.abs(K_new - K).max() < tol:
            return K_new
        K = K_new
    return K


def fit_confusion_model(
    calib: CalibrationData, ideal: InterferometerModel
) -> ConfusionModel:
    """Fit per-port forward confusion matrices from calibration histograms.

    The reported count distribution at each port is a mixture over the
    latent true count, P(m | phi) = sum_t K[m, t] * PoissonFolded(t;
    mu(phi)), and K is estimated by EM (multinomial maximum likelihood)
    across all calibration phases jointly.
    """
    n_max = calib.n_max
    phases = calib.phases
    true_c = np.empty((len(phases), n_max + 1))
    true_d = np.empty((len(phases), n_max + 1))
    for j, phi in enumerate(phases):
        mu_c, mu_d = ideal.output_means(phi)
        true_c[j] = _folded_poisson(mu_c, ideal.n_max, n_max)
        true_d[j] = _folded_poisson(mu_d, ideal.n_max, n_max)
    if np.linalg.matrix_rank(true_c) < n_max + 1:
        raise FitError(
            f"too few distinct calibration phases to resolve {n_max + 1} "
            "true-count levels"
        )
    obs_c = calib.counts.sum(axis=2).astype(float)
    obs_d = calib.counts.sum(axis=1).astype(float)
    return ConfusionModel(
        forward_c=_em_port_confusion(obs_c, true_c),
        forward_d=_em_port_confusion(obs_d, true_d),
        n_max=n_max,
    )


def fit_retrodictive_weights(
    calib: CalibrationData, ideal: InterferometerModel
) -> RetrodictiveWeights:
    """Fit P(true pair | measured pair) from calibration histograms.

    The per-pair posterior phase curves alone cannot identify the weights:
    the ideal densities span only the polynomials of degree 2*n_max in
    cos^2(phi/2), so distinct weight tables produce identical curves. The
    per-detector channel structure restores identifiability, so the fit
    estimates each port's confusion matrix by EM on the per-port count
    histograms and Bayes-inverts it under the flat phase prior. Measured pairs with (near) zero probability under
    the fitted channel get uniform fallback weights with a warning.
    """
    model = fit_confusion_model(calib, ideal)
    return _retrodictive_from_channel(model, ideal, warn_unidentified=True)


def exact_retrodictive_weights(
    model: ConfusionModel, ideal: InterferometerModel, n_quad: int = 2001
) -> RetrodictiveWeights:
    """Analytic retrodictive weights for a known channel under a flat prior.

    P(true | measured) = K(measured | true) * q(true) / normalization, with
    q the phase-averaged true-pair probability (folded at n_max). Serves as
    the oracle for the fit round-trip.
    """
    return _retrodictive_from_channel(model, ideal, n_quad=n_quad)


def _retrodictive_from_channel(
    model: ConfusionModel,
    ideal: InterferometerModel,
    n_quad: int = 2001,
    warn_unidentified: bool = False,
) -> RetrodictiveWeights:
    n_max = model.n_max
    q = _true_pair_marginals(ideal, n_max, n_quad)
    table = np.zeros((n_max + 1,) * 4)
    uniform = np.full((n_max + 1, n_max + 1), 1.0 / (n_max + 1) ** 2)
    for nc in range(n_max + 1):
        for nd in range(n_max + 1):
            joint = (
                model.forward_c[nc, :][:, None] * model.forward_d[nd, :][None, :] * q
            )
            total = joint.sum()
            if total < 1e-300:
                if warn_unidentified:
                    warnings.warn(
                        f"measured pair ({nc},{nd}) has no support under the "
                        "fitted channel; using uniform retrodictive weights",
                        stacklevel=3,
                    )
                table[nc, nd] = uniform
            else:
                table[nc, nd] = joint / total
    return RetrodictiveWeights(table=table, n_max=n_max)


def _true_pair_marginals(
    ideal: InterferometerModel, n_max: int, n_quad: int
) -> np.ndarray:
    """Phase-averaged true-pair probabilities q(tc, td), folded at n_max."""
    phis = np.linspace(0.0, np.pi, n_quad)
    q = np.zeros((n_max + 1, n_max + 1))
    mu_c = ideal.nbar * np.cos(phis / 2.0) ** 2
    mu_d = ideal.nbar * np.sin(phis / 2.0) ** 2
    for tc in range(ideal.n_max + 1):
        p_c = np.exp(_log_poisson_pmf(tc, mu_c))
        for td in range(ideal.n_max + 1):
            p_d = np.exp(_log_poisson_pmf(td, mu_d))
            q[min(tc, n_max), min(td, n_max)] += np.trapezoid(p_c * p_d / np.pi, phis)
    return q


def posterior_fit(
    measured: Outcome, weights: RetrodictiveWeights, grid: PhaseGrid
) -> Posterior:
    """Single-shot posterior for a measured pair: mixture of ideal posteriors."""
    return Posterior.from_log_density(
        grid, log_posterior_fit(measured, weights, grid.nodes)
    )


def log_posterior_fit(
    measured: Outcome, weights: RetrodictiveWeights, nodes: np.ndarray
) -> np.ndarray:
    """Log of the (unnormalized) retrodictive mixture density on ``nodes``."""
    dist = weights.distribution(measured.n_c, measured.n_d)
    density = np.zeros_like(nodes)
    for tc in range(weights.n_max + 1):
        for td in range(weights.n_max + 1):
            w = dist[tc, td]
            if w > 0.0:
                outcome = Outcome(tc, td)
                density += (
                    w
                    * normalization_constant(outcome)
                    * np.exp(log_shape(outcome, nodes))
                )
    with np.errstate(divide="ignore"):
        return np.log(density)
