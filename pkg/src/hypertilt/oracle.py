"""Brute-force cross-checks that do not use the closed forms in ``model``/``fisher``.

* Grid quadrature of the density-weighted cosine for p(theta), N = 1, 2.
* Central finite differences of p(theta) fed into the binary Fisher formula.
* Monte Carlo estimate of 4 Var[H] for the GHZ x Gaussian probe.

Random numbers come from NumPy's PCG64 bit generator seeded through
``SeedSequence``; shard ``i`` of a run with master seed ``s`` uses
``SeedSequence(s).spawn(n_shards)[i]``, so results do not depend on how
shards are scheduled.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fisher import cfi_binary
from .model import projection_probability
from .probe import ProbeConfig, spatial_state

#: number of samples per Monte Carlo shard; fixed so merged results ignore worker count
SHARD_SIZE = 1 << 16


class ResolutionError(ValueError):
    """The quadrature grid cannot resolve the cosine being integrated."""


class CancellationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class GridSpec:
    half_width_sigmas: float = 6.0
    points_per_axis: int | None = None  # default 4096 in 1D, 512 in 2D

    def __post_init__(self):
        if self.half_width_sigmas < 6.0:
            raise ValueError("grid must cover at least 6 standard deviations")
        if self.points_per_axis is not None and self.points_per_axis < 64:
            raise ValueError("need at least 64 points per axis")

    def points(self, ndim: int) -> int:
        if self.points_per_axis is not None:
            return self.points_per_axis
        return 4096 if ndim == 1 else 512


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def quadrature_probability(probe: ProbeConfig, theta: float, grid: GridSpec | None = None) -> float:
    """p(theta) = 1/2 (1 + V <cos(4 k theta sum_j x_j)>) by trapezoidal quadrature.

    The positions are written x = mean + L z with z standard normal on the
    support of the covariance, so a perfectly correlated pair collapses to a
    one-dimensional integral.
    """
    grid = grid or GridSpec()
    if probe.n_photons > 2:
        raise NotImplementedError("quadrature oracle supports N = 1, 2; use mc_generator_variance_qfi")
    state = spatial_state(probe)
    factor = state.factor()  # N x r
    r = factor.shape[1]
    m = grid.points(r)
    z = np.linspace(-grid.half_width_sigmas, grid.half_width_sigmas, m)
    h = z[1] - z[0]
    w1 = _trapezoid_weights(m, h) * np.exp(-0.5 * z * z)
    freq = 4.0 * probe.wavenumber_k * theta
    # projection of the sum S onto each standard-normal coordinate
    slope = factor.sum(axis=0)
    if r and abs(freq) * np.abs(slope).max() * 8 * h > 2.0 * math.pi:
        raise ResolutionError("cosine period spans fewer than 8 grid steps; refine the grid")
    offset = freq * state.sum_mean()
    if r == 0:  # the sum of positions is deterministic
        mean_cos = math.cos(offset)
    elif r == 1:
        phase = offset + freq * slope[0] * z
        mean_cos = np.dot(w1, np.cos(phase)) / w1.sum()
    else:
        phase = offset + freq * (slope[0] * z[:, None] + slope[1] * z[None, :])
        weight = w1[:, None] * w1[None, :]
        mean_cos = np.sum(weight * np.cos(phase)) / weight.sum()
    return 0.5 * (1.0 + probe.visibility * mean_cos)


def default_fd_step(probe: ProbeConfig) -> float:
    """max(1e-9 rad, 1e-4 of the theta scale 1/(4 N k d + 4 k sigma_(N)))."""
    k, n = probe.wavenumber_k, probe.n_photons
    scale = 1.0 / (4.0 * n * k * abs(probe.displacement_d) + 4.0 * k * math.sqrt(probe.sigma2_ell))
    return max(1e-9, 1e-4 * scale)


def finite_difference_derivative(probe: ProbeConfig, theta, step: float | None = None):
    """Central difference of projection_probability; also returns the cancellation mask."""
    h = default_fd_step(probe) if step is None else step
    if not h > 0:
        raise ValueError("step must be positive")
    theta = np.asarray(theta, dtype=float)
    hi = projection_probability(probe, theta + h)
    lo = projection_probability(probe, theta - h)
    diff = np.asarray(hi - lo)
    cancelled = np.abs(diff) < 64 * np.finfo(float).eps
    return diff / (2.0 * h), cancelled


def finite_difference_cfi(probe: ProbeConfig, theta, step: float | None = None, warn: bool = True):
    dp, cancelled = finite_difference_derivative(probe, theta, step)
    if warn and np.any(cancelled & (dp != 0)):
        warnings.warn("finite-difference derivative lost to cancellation", CancellationWarning, stacklevel=2)
    return cfi_binary(projection_probability(probe, theta), dp)


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    standard_error: float
    samples: int
    seed: int


def _shard_generator_values(probe: ProbeConfig, factor: np.ndarray, mean: np.ndarray, n: int, seed_seq) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    s = rng.choice(np.array([-1.0, 1.0]), size=n)
    z = rng.standard_normal((n, factor.shape[1]))
    total = mean.sum() + z @ factor.sum(axis=0)
    return 2.0 * probe.wavenumber_k * s * total


def mc_generator_variance_qfi(probe: ProbeConfig, samples: int, seed: int, workers: int = 1) -> MCEstimate:
    """Monte Carlo 4 Var[H] with H = 2k s sum_j x_j.

    One sign s = +-1 is shared by all photons (the two GHZ branches); the
    positions are drawn from the Gaussian spatial state.
    """
    if samples < 10_000:
        raise ValueError("need at least 1e4 samples")
    state = spatial_state(probe)
    factor = state.factor()
    n_shards = -(-samples // SHARD_SIZE)
    sizes = [SHARD_SIZE] * (n_shards - 1) + [samples - SHARD_SIZE * (n_shards - 1)]
    children = np.random.SeedSequence(seed).spawn(n_shards)

    def run(i):
        return _shard_generator_values(probe, factor, state.mean, sizes[i], children[i])

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(n_shards)))
    else:
        parts = [run(i) for i in range(n_shards)]
    h = np.concatenate(parts)
    var = h.var(ddof=1)
    centered = h - h.mean()
    mu4 = np.mean(centered**4)
    se_var = math.sqrt(max(mu4 - var * var, 0.0) / samples)
    return MCEstimate(estimate=4.0 * var, standard_error=4.0 * se_var, samples=samples, seed=seed)


def oracle_record(case: str, analytic: float, oracle: float, seed: int | None = None) -> dict:
    """JSON-ready comparison record."""
    abs_err = abs(analytic - oracle)
    rel_err = abs_err / abs(analytic) if analytic != 0 else abs_err
    return {"case": case, "analytic": analytic, "oracle": oracle, "abs_err": abs_err, "rel_err": rel_err, "seed": seed}
