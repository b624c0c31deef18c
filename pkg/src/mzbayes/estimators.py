"""Baseline (non-Bayesian) phase estimators.

Classical fringe inversion of the mean count difference, its noisy
generalization with fitted fringe parameters, the per-shot YMK estimator
arccos[(Nc-Nd)/(Nc+Nd)], and maximum likelihood by grid search with
golden-section refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from mzbayes.detector import CalibrationData, FitError
from mzbayes.photon_model import Outcome
from mzbayes.posterior import PhaseGrid


class DivergenceError(ValueError):
    """Predicted uncertainty diverges at this phase."""


class UndefinedEstimateError(ValueError):
    """No photons detected; the per-shot estimator is undefined."""


@dataclass(frozen=True)
class FringeParams:
    """Fringe model M(theta) = amplitude * cos(a + theta) + b."""

    a: float = 0.0
    b: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be > 0, got {self.amplitude}")


def _mean_difference(outcomes: Sequence[Outcome]) -> float:
    if len(outcomes) < 1:
        raise ValueError("need at least one outcome")
    return sum(o.n_c - o.n_d for o in outcomes) / len(outcomes)


def classical_estimate(outcomes: Sequence[Outcome], nbar: float) -> float:
    """arccos(M_p / nbar) with the argument clamped to [-1, 1].

    Clamping keeps the estimator total: finite-sample noise routinely
    pushes |M_p| past nbar near theta = 0 or pi.
    """
    if not nbar > 0:
        raise ValueError(f"nbar must be > 0, got {nbar}")
    arg = _mean_difference(outcomes) / nbar
    return math.acos(min(1.0, max(-1.0, arg)))


def classical_uncertainty(theta: float, nbar: float, p: int) -> float:
    """Error-propagation uncertainty 1 / (sqrt(p * nbar) * sin(theta))."""
    if not 0.0 < theta < math.pi:
        raise DivergenceError(
            f"classical uncertainty diverges at theta = {theta}"
        )
    if not nbar > 0 or p < 1:
        raise ValueError("need nbar > 0 and p >= 1")
    return 1.0 / (math.sqrt(p * nbar) * math.sin(theta))


def fit_fringe(calib: CalibrationData) -> FringeParams:
    """Least-squares fit of the calibration fringe M(theta) = A cos(a+theta)+b.

    Linear in (A cos a, -A sin a, b); needs at least three distinct phases
    and a non-degenerate fringe amplitude.
    """
    theta = np.asarray(calib.phases, dtype=float)
    if len(np.unique(theta)) < 3:
        raise FitError("fringe fit needs >= 3 distinct calibration phases")
    m = calib.mean_difference()
    design = np.column_stack([np.cos(theta), np.sin(theta), np.ones_like(theta)])
    coef, *_ = np.linalg.lstsq(design, m, rcond=None)
    c1, c2, b = coef
    amplitude = math.hypot(c1, c2)
    if amplitude < 1e-8 * max(1.0, abs(b)):
        raise FitError("no fringe: fitted amplitude is degenerate")
    return FringeParams(a=math.atan2(-c2, c1), b=float(b), amplitude=amplitude)


def noisy_classical_estimate(
    outcomes: Sequence[Outcome], params: FringeParams
) -> float:
    """Invert the fitted fringe: theta = arccos((M_p - b)/A) - a, folded to [0, pi]."""
    arg = (_mean_difference(outcomes) - params.b) / params.amplitude
    theta = math.acos(min(1.0, max(-1.0, arg))) - params.a
    if theta < 0.0:
        theta = -theta
    if theta > math.pi:
        theta = 2.0 * math.pi - theta
    return min(max(theta, 0.0), math.pi)


def ymk_estimate(outcome: Outcome) -> float:
    """arccos[(Nc - Nd) / (Nc + Nd)] for a single photon-bearing shot."""
    if outcome.total < 1:
        raise UndefinedEstimateError("YMK estimate undefined for zero photons")
    return math.acos((outcome.n_c - outcome.n_d) / outcome.total)


def ymk_sequence_estimate(outcomes: Sequence[Outcome]) -> float:
    """Average of per-shot YMK estimates over shots with at least one photon."""
    vals = [ymk_estimate(o) for o in outcomes if o.total >= 1]
    if not vals:
        raise UndefinedEstimateError("no photon-bearing shots in the sequence")
    return sum(vals) / len(vals)


class MLEstimate(NamedTuple):
    phase: float
    flat: bool


_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(
    f: Callable[[float], float], a: float, b: float, tol: float = 1e-10
) -> float:
    """Maximize a unimodal function on [a, b] by golden-section search."""
    x1 = b - _INV_GOLDEN * (b - a)
    x2 = a + _INV_GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_GOLDEN * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_GOLDEN * (b - a)
            f1 = f(x1)
    return (a + b) / 2.0


LogLikelihood = Callable[[np.ndarray, Outcome], np.ndarray]

_FLAT_TOL = 1e-12


def ml_estimate(
    outcomes: Sequence[Outcome],
    log_likelihood: LogLikelihood,
    grid: PhaseGrid,
) -> MLEstimate:
    """Maximum-likelihood phase: grid argmax refined by golden-section search.

    ``log_likelihood(phis, outcome)`` must return the per-shot log
    likelihood on an array of phases. Ties go to the smaller phase; a flat
    likelihood returns pi/2 with the flag set.
    """
    if len(outcomes) < 1:
        raise ValueError("need at least one outcome")
    unique: dict[tuple[int, int], int] = {}
    for o in outcomes:
        key = (o.n_c, o.n_d)
        unique[key] = unique.get(key, 0) + 1
    total = np.zeros(grid.n_points)
    for (nc, nd), count in unique.items():
        total = total + count * log_likelihood(grid.nodes, Outcome(nc, nd))
    finite = total[np.isfinite(total)]
    if finite.size == 0:
        raise ValueError("likelihood vanished at every grid node")
    if finite.max() - finite.min() < _FLAT_TOL:
        return MLEstimate(phase=math.pi / 2.0, flat=True)
    i = int(np.argmax(total))
    lo = grid.nodes[max(i - 1, 0)]
    hi = grid.nodes[min(i + 1, grid.n_points - 1)]

    def objective(phi: float) -> float:
        phis = np.array([phi])
        val = 0.0
        for (nc, nd), count in unique.items():
            val += count * float(log_likelihood(phis, Outcome(nc, nd))[0])
        return val

    return MLEstimate(phase=golden_section_max(objective, lo, hi), flat=False)
