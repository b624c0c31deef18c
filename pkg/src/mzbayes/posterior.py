"""Grid-based Bayesian phase inference on [0, pi].

The single-shot posterior under a flat prior has the closed form
``C * cos^{2 Nc}(phi/2) * sin^{2 Nd}(phi/2)`` and does not depend on the
input intensity. Multi-shot posteriors are accumulated in log space and
renormalized once, which stays stable for tens of thousands of shots.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import gammaln

from mzbayes.photon_model import Outcome


class DegenerateEvidenceError(ValueError):
    """Accumulated posterior vanished at every grid node."""


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform grid of n_points phases covering [0, pi] inclusive."""

    n_points: int = 4096

    def __post_init__(self) -> None:
        if self.n_points < 2:
            raise ValueError(f"grid needs >= 2 points, got {self.n_points}")

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.linspace(0.0, np.pi, self.n_points)
        nodes.flags.writeable = False
        return nodes

    @property
    def spacing(self) -> float:
        return np.pi / (self.n_points - 1)


@dataclass(frozen=True)
class Posterior:
    """Normalized phase density on a grid; trapezoidal integral is 1."""

    grid: PhaseGrid
    log_density: np.ndarray  # log of the normalized density (-inf allowed)

    @classmethod
    def from_log_density(cls, grid: PhaseGrid, log_density: np.ndarray) -> "Posterior":
        log_density = np.asarray(log_density, dtype=float)
        if log_density.shape != grid.nodes.shape:
            raise ValueError("log_density shape does not match grid")
        peak = np.max(log_density)
        if not np.isfinite(peak):
            raise DegenerateEvidenceError(
                "posterior is zero (or undefined) at every grid node"
            )
        shifted = np.exp(log_density - peak)
        norm = np.trapezoid(shifted, grid.nodes)
        with np.errstate(divide="ignore"):
            out = log_density - peak - np.log(norm)
        out.flags.writeable = False
        return cls(grid=grid, log_density=out)

    @cached_property
    def density(self) -> np.ndarray:
        d = np.exp(self.log_density)
        d.flags.writeable = False
        return d

    def write_csv(self, path) -> None:
        """Export as ``phi,density`` rows (phi in radians)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["phi", "density"])
            for phi, dens in zip(self.grid.nodes, self.density):
                writer.writerow([f"{phi:.12g}", f"{dens:.12g}"])


def log_shape(outcome: Outcome, nodes: np.ndarray) -> np.ndarray:
    """Unnormalized log posterior 2*Nc*log cos(phi/2) + 2*Nd*log sin(phi/2)."""
    with np.errstate(divide="ignore"):
        log_cos = np.log(np.cos(nodes / 2.0))
        log_sin = np.log(np.sin(nodes / 2.0))
    terms = np.zeros_like(nodes)
    if outcome.n_c:
        terms = terms + 2.0 * outcome.n_c * log_cos
    if outcome.n_d:
        terms = terms + 2.0 * outcome.n_d * log_sin
    return terms


def single_shot_posterior(outcome: Outcome, grid: PhaseGrid) -> Posterior:
    """Posterior after one pulse; independent of the input intensity."""
    return Posterior.from_log_density(grid, log_shape(outcome, grid.nodes))


def normalization_constant(outcome: Outcome) -> float:
    """Constant C with integral_0^pi C cos^{2Nc}(phi/2) sin^{2Nd}(phi/2) dphi = 1.

    Evaluated as Gamma(1+Nc+Nd) / (Gamma(1/2+Nc) * Gamma(1/2+Nd)) through
    log-gamma to avoid overflow at large counts.
    """
    nc, nd = outcome.n_c, outcome.n_d
    return float(
        np.exp(gammaln(1.0 + nc + nd) - gammaln(0.5 + nc) - gammaln(0.5 + nd))
    )


def accumulate(outcomes: Sequence[Outcome], grid: PhaseGrid) -> Posterior:
    """Posterior after a sequence of independent pulses (product of shots).

    The per-shot log densities add, so only the total counts matter; an
    empty sequence returns the flat prior.
    """
    total = Outcome(
        sum(o.n_c for o in outcomes), sum(o.n_d for o in outcomes)
    )
    return Posterior.from_log_density(grid, log_shape(total, grid.nodes))


def accumulate_log_densities(
    log_terms: Iterable[np.ndarray], grid: PhaseGrid
) -> Posterior:
    """Accumulate arbitrary per-shot log densities (e.g. noisy mixtures)."""
    total = np.zeros(grid.n_points)
    for term in log_terms:
        total = total + term
    return Posterior.from_log_density(grid, total)


def posterior_mean(post: Posterior) -> float:
    """Mean phase under the posterior, by trapezoidal quadrature."""
    return float(np.trapezoid(post.grid.nodes * post.density, post.grid.nodes))


def credible_interval(post: Posterior, level: float = 0.6827) -> float:
    """Half-width of the equal-tail-mass interval of ``level`` around the mean.

    When the interval would overflow a domain edge the missing mass is
    reassigned to the interior side, so the width stays finite and
    well-defined even for posteriors peaked at 0 or pi.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    nodes = post.grid.nodes
    cdf = cumulative_trapezoid(post.density, nodes, initial=0.0)
    cdf /= cdf[-1]
    mass_at_mean = float(np.interp(posterior_mean(post), nodes, cdf))
    lo = mass_at_mean - level / 2.0
    hi = mass_at_mean + level / 2.0
    if lo < 0.0:
        hi -= lo  # push the underflow to the upper side
        lo = 0.0
    if hi > 1.0:
        lo -= hi - 1.0
        hi = 1.0
        lo = max(lo, 0.0)
    a = float(np.interp(lo, cdf, nodes))
    b = float(np.interp(hi, cdf, nodes))
    return (b - a) / 2.0
