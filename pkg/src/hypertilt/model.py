"""Closed-form forward model of the tilted Sagnac interferometer.

The tilt acts as exp(-i 2 k theta sum_j sigma_z,j x_j).  With GHZ polarization
only the two branches s = +1 and s = -1 survive, so projecting back onto the
initial polarization state gives

    p(theta) = 1/2 [1 + V Re <exp(-i 4 k theta S)>],   S = sum_j x_j,

and since S is Gaussian the expectation is its characteristic function:
a Bloch vector of length V exp(-8 k^2 theta^2 Var[S]) rotated by 4 k theta <S>.
For N = 1, 2 this is the usual damped fringe with sigma_(N)^2 = sigma2 + (N-1) cov.

The sign of the momentum kick per path is a convention; p is even in it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .probe import ProbeConfig


@dataclass(frozen=True)
class CoherenceFactor:
    """Length (``magnitude``) and rotation angle (``phase``) of the Bloch vector."""

    magnitude: float | np.ndarray
    phase: float | np.ndarray

    @property
    def real(self):
        return self.magnitude * np.cos(self.phase)

    def probability(self):
        return 0.5 * (1.0 + self.real)


def _rates(probe: ProbeConfig) -> tuple[float, float]:
    """(omega, beta) such that p = 1/2 [1 + V cos(omega theta) exp(-beta theta^2)]."""
    n, k = probe.n_photons, probe.wavenumber_k
    omega = 4.0 * k * n * probe.displacement_d
    beta = 8.0 * k * k * n * probe.sigma2_ell
    return omega, beta


def coherence(probe: ProbeConfig, theta) -> CoherenceFactor:
    theta = np.asarray(theta, dtype=float)
    omega, beta = _rates(probe)
    magnitude = probe.visibility * np.exp(-beta * theta * theta)
    phase = omega * theta
    if theta.ndim == 0:
        return CoherenceFactor(float(magnitude), float(phase))
    return CoherenceFactor(magnitude, phase)


def projection_probability(probe: ProbeConfig, theta):
    """Probability of finding the output polarization in the input GHZ state."""
    return coherence(probe, theta).probability()


def probability_derivative(probe: ProbeConfig, theta):
    """Analytic dp/dtheta."""
    theta = np.asarray(theta, dtype=float)
    omega, beta = _rates(probe)
    env = probe.visibility * np.exp(-beta * theta * theta)
    out = -0.5 * env * (omega * np.sin(omega * theta) + 2.0 * beta * theta * np.cos(omega * theta))
    return float(out) if out.ndim == 0 else out


def fringe_period(probe: ProbeConfig) -> float:
    """Oscillation period of p in theta, 2 pi / (4 N k d); inf when d = 0."""
    omega, _ = _rates(probe)
    return np.inf if omega == 0 else 2.0 * np.pi / abs(omega)


class CountModel(str, Enum):
    EXACT = "exact"
    BINOMIAL = "binomial"
    POISSON_PAIR = "poisson_pair"


@dataclass(frozen=True)
class FringeCurve:
    """Sampled fringe: theta (rad) with probabilities and/or success counts.

    ``probability`` is the exact model value (``exact`` curves) or the
    empirical frequency when only counts are known.
    """

    theta: np.ndarray
    probability: np.ndarray | None = None
    successes: np.ndarray | None = None
    trials: np.ndarray | None = None
    count_model: CountModel = CountModel.EXACT
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if theta.size == 0:
            raise ValueError("fringe curve needs at least one point")
        if np.any(np.diff(theta) <= 0):
            raise ValueError("theta values must be strictly increasing")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "count_model", CountModel(self.count_model))
        if self.probability is None and self.successes is None:
            raise ValueError("fringe curve needs probabilities or counts")
        if self.probability is not None:
            p = np.asarray(self.probability, dtype=float).reshape(-1)
            if p.shape != theta.shape:
                raise ValueError("probability column length mismatch")
            if np.any((p < 0) | (p > 1)):
                raise ValueError("probabilities must lie in [0, 1]")
            object.__setattr__(self, "probability", p)
        if self.successes is not None:
            s = np.asarray(self.successes, dtype=np.int64).reshape(-1)
            t = np.asarray(self.trials, dtype=np.int64).reshape(-1)
            if s.shape != theta.shape or t.shape != theta.shape:
                raise ValueError("count columns length mismatch")
            if np.any(s < 0) or np.any(s > t):
                raise ValueError("need 0 <= successes <= trials")
            object.__setattr__(self, "successes", s)
            object.__setattr__(self, "trials", t)

    def __len__(self):
        return self.theta.size

    @property
    def has_counts(self) -> bool:
        return self.successes is not None

    def frequencies(self) -> np.ndarray:
        """Empirical success fraction; trials = 0 points fall back to 1/2."""
        if not self.has_counts:
            return self.probability
        with np.errstate(invalid="ignore", divide="ignore"):
            f = self.successes / self.trials
        return np.where(self.trials > 0, f, 0.5)


def fringe_scan(probe: ProbeConfig, theta_grid) -> FringeCurve:
    """Noise-free probabilities on a strictly increasing theta grid."""
    theta = np.asarray(theta_grid, dtype=float).reshape(-1)
    if theta.size == 0:
        raise ValueError("empty theta grid")
    return FringeCurve(theta=theta, probability=projection_probability(probe, theta))
