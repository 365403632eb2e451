"""Classical and quantum Fisher information for the binary polarization measurement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import probability_derivative, projection_probability
from .probe import ProbeConfig

#: probabilities are clamped to [CLAMP_EPS, 1 - CLAMP_EPS] inside cfi_binary
CLAMP_EPS = 1e-12
#: below this value of |theta| k max(sigma_(N), |d|) the V = 1 form is replaced by its series
SERIES_THRESHOLD = 1e-8


class DivergentInformation(ArithmeticError):
    """Fisher information of a binary outcome diverges at p in {0, 1}."""


class UnboundedVariance(ArithmeticError):
    """Cramer-Rao floor is infinite because the Fisher information vanishes."""


def cfi_binary(p, dp_dtheta, *, clamp: bool = True, eps: float = CLAMP_EPS, return_clamped: bool = False):
    """Fisher information (dp/dtheta)^2 / (p (1 - p)) of a two-outcome measurement.

    With ``clamp`` (default) p is held inside [eps, 1 - eps] and the number of
    clamped points is available through ``return_clamped``.  Without it, an
    endpoint probability with nonzero slope raises DivergentInformation.
    """
    p = np.asarray(p, dtype=float)
    dp = np.asarray(dp_dtheta, dtype=float)
    p, dp = np.broadcast_arrays(p, dp)
    outside = (p < eps) | (p > 1.0 - eps)
    if not clamp and np.any(outside & (dp != 0) & ((p <= 0) | (p >= 1))):
        raise DivergentInformation("p is 0 or 1 with nonzero derivative")
    pc = np.clip(p, eps, 1.0 - eps)
    out = np.where(dp == 0, 0.0, dp * dp / (pc * (1.0 - pc)))
    n_clamped = int(np.count_nonzero(outside & (dp != 0)))
    out = float(out) if out.ndim == 0 else out
    return (out, n_clamped) if return_clamped else out


def qfi_limit(probe: ProbeConfig) -> float:
    """theta -> 0 limit of cfi_analytic at V = 1; coincides with qfi()."""
    n, k, d = probe.n_photons, probe.wavenumber_k, probe.displacement_d
    return 16.0 * n * k * k * (probe.sigma2_ell + n * d * d)


def cfi_closed_form(n: int, k: float, d: float, sigma2_ell: float, visibility: float, theta):
    """Fisher information of the binary projection from raw parameters.

    Damped-fringe expression with ell = N; algebraically (dp/dtheta)^2 / (p (1-p))
    of projection_probability.  The denominator exp(x) - V^2 cos^2 y is
    evaluated as expm1(x) + sin^2 y + (1 - V^2) cos^2 y to avoid cancellation
    near theta = 0.  No parameter validation: used for error propagation.
    """
    theta = np.asarray(theta, dtype=float)
    v = visibility
    phase = 4.0 * k * n * d * theta
    c, s = np.cos(phase), np.sin(phase)
    bracket = d * s + 4.0 * k * theta * sigma2_ell * c
    num = 16.0 * v * v * n * n * k * k * bracket * bracket
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        den = np.expm1(16.0 * n * k * k * sigma2_ell * theta * theta) + s * s + (1.0 - v * v) * c * c
        out = np.where(num == 0, 0.0, num / den)
    if v == 1.0:
        small = np.abs(theta) * k * max(np.sqrt(sigma2_ell), abs(d)) < SERIES_THRESHOLD
        out = np.where(small, 16.0 * n * k * k * (sigma2_ell + n * d * d), out)
    return float(out) if out.ndim == 0 else out


def cfi_analytic(probe: ProbeConfig, theta):
    """Fisher information of the binary polarization projection at tilt ``theta``.

    At V = 1 and |theta| k max(sigma_(N), |d|) below SERIES_THRESHOLD the
    indeterminate 0/0 form is replaced by its leading series term, which
    equals the quantum Fisher information.
    """
    return cfi_closed_form(
        probe.n_photons, probe.wavenumber_k, probe.displacement_d, probe.sigma2_ell, probe.visibility, theta
    )


def cfi_from_probability(probe: ProbeConfig, theta, **kwargs):
    """Route through cfi_binary with the analytic derivative of p."""
    return cfi_binary(projection_probability(probe, theta), probability_derivative(probe, theta), **kwargs)


def qfi(probe: ProbeConfig) -> float:
    """Quantum Fisher information 4 Var[H], H = 2k sum_j sigma_z,j x_j, for GHZ x Gaussian."""
    n, k, d = probe.n_photons, probe.wavenumber_k, probe.displacement_d
    return 16.0 * k * k * (n * probe.sigma2 + n * n * d * d + n * (n - 1) * probe.pairwise_cov)


def shot_noise_baseline(probe: ProbeConfig, sigma2: float | None = None) -> float:
    """N times the single-photon QFI: N ideal, independent, unentangled photons."""
    k, d = probe.wavenumber_k, probe.displacement_d
    s2 = probe.sigma2 if sigma2 is None else sigma2
    return probe.n_photons * 16.0 * k * k * (s2 + d * d)


def crb_variance(fisher_value: float, repetitions: int) -> float:
    """Cramer-Rao variance floor 1 / (nu F)."""
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    if not fisher_value > 0:
        raise UnboundedVariance(f"Fisher information {fisher_value} gives no bound")
    return 1.0 / (repetitions * fisher_value)


@dataclass(frozen=True)
class FisherReport:
    """Fisher information table over a theta grid (rad, rad^-2).

    ``cfi_lower``/``cfi_upper`` hold a first-order error band when the
    report was built from fitted parameters.
    """

    theta: np.ndarray
    cfi: np.ndarray
    qfi: float
    shot_noise_baseline: float
    cfi_lower: np.ndarray | None = None
    cfi_upper: np.ndarray | None = None

    @property
    def sub_shot_noise(self) -> np.ndarray:
        return self.cfi > self.shot_noise_baseline

    @property
    def max_cfi(self) -> float:
        return float(np.max(self.cfi))


def fisher_report(probe: ProbeConfig, theta_grid, sigma2_single: float | None = None) -> FisherReport:
    theta = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    return FisherReport(
        theta=theta,
        cfi=np.atleast_1d(cfi_analytic(probe, theta)),
        qfi=qfi(probe),
        shot_noise_baseline=shot_noise_baseline(probe, sigma2_single),
    )


@dataclass(frozen=True)
class ScalingRow:
    n: int
    qfi: float
    baseline: float
    exponent: float  # log-log slope of qfi over all N up to this row; nan for the first


def scaling_exponent(ns, values) -> float:
    ns = np.asarray(ns, dtype=float)
    if ns.size < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(ns), np.log(np.asarray(values, dtype=float)), 1)
    return float(slope)


def scaling_sweep(template: ProbeConfig, n_range, cov_rule: str = "max") -> list[ScalingRow]:
    """QFI versus photon number.

    ``cov_rule`` is ``"max"`` (perfect correlation, cov = sigma2), ``"zero"``
    (independent positions) or ``"template"`` (keep the template's cov).
    """
    if cov_rule == "max":
        cov = template.sigma2
    elif cov_rule == "zero":
        cov = 0.0
    elif cov_rule == "template":
        cov = template.pairwise_cov
    else:
        raise ValueError(f"unknown cov_rule {cov_rule!r}")
    rows: list[ScalingRow] = []
    ns, qs = [], []
    for n in n_range:
        probe = template.replace(n_photons=n, pairwise_cov=cov)
        q = qfi(probe)
        ns.append(n)
        qs.append(q)
        rows.append(ScalingRow(n=int(n), qfi=q, baseline=shot_noise_baseline(probe), exponent=scaling_exponent(ns, qs)))
    return rows
