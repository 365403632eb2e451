"""Physical configuration of single-photon, photon-pair and N-photon GHZ probes.

All quantities are SI: meters, radians, radians per meter.  Conversion from the
laboratory units (nm, mm, mm^2, urad) happens at the CLI boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

#: relative tolerance used when checking positive semidefiniteness
PSD_RTOL = 1e-12


class ProbeError(ValueError):
    """Raised for physically inconsistent probe parameters."""


class PolarizationModel(Enum):
    """Polarization state of the probe.

    Only the GHZ family (|0...0> + |1...1>)/sqrt(2) is supported; it is
    |phi+> for one photon and |Phi+> for a pair.  The Pauli convention is
    sigma_z = |H><H| - |V><V|, so <sigma_z,j> = 0 and <sigma_z,i sigma_z,j> = 1.
    """

    GHZ = "ghz"

    def z_mean(self, n: int) -> np.ndarray:
        return np.zeros(n)

    def zz_correlation(self, n: int) -> np.ndarray:
        return np.ones((n, n))


def wavenumber_from_nm(wavelength_nm: float) -> float:
    """k = 2 pi / lambda for a wavelength given in nanometers."""
    if not wavelength_nm > 0:
        raise ProbeError(f"wavelength must be positive, got {wavelength_nm!r}")
    return 2.0 * math.pi / (wavelength_nm * 1e-9)


@dataclass(frozen=True)
class GaussianSpatialState:
    """Mean vector and covariance of the N transverse photon positions (m, m^2)."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.covariance, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ProbeError(f"covariance shape {cov.shape} does not match mean of length {mean.size}")
        if not np.allclose(cov, cov.T, rtol=0, atol=PSD_RTOL * np.abs(cov).max(initial=0.0)):
            raise ProbeError("covariance matrix is not symmetric")
        eig = np.linalg.eigvalsh(cov)
        if eig.min() < -PSD_RTOL * max(eig.max(), 0.0):
            raise ProbeError(f"covariance matrix is not positive semidefinite (min eigenvalue {eig.min():.3e})")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def n(self) -> int:
        return self.mean.size

    def correlation_coefficient(self, i: int = 0, j: int = 1) -> float:
        c = self.covariance
        return float(c[i, j] / math.sqrt(c[i, i] * c[j, j]))

    def sum_mean(self) -> float:
        """Mean of S = sum_j x_j."""
        return float(self.mean.sum())

    def sum_variance(self) -> float:
        """Variance of S = sum_j x_j, i.e. 1^T Sigma 1."""
        return float(self.covariance.sum())

    def factor(self, rtol: float = PSD_RTOL) -> np.ndarray:
        """Return L (N x r) with L L^T = covariance, dropping null directions.

        Rank-deficient covariances (perfect correlation) are reduced to their
        support instead of being regularized.
        """
        eig, vec = np.linalg.eigh(self.covariance)
        keep = eig > rtol * max(eig.max(), 0.0)
        return vec[:, keep] * np.sqrt(eig[keep])


@dataclass(frozen=True)
class ProbeConfig:
    """Full physical specification of one tilt-sensing experiment.

    ``pairwise_cov`` is the covariance shared by every pair of photons
    (exchange-symmetric, uniform-correlation model).  For a single photon it
    is stored as 0.
    """

    n_photons: int
    wavenumber_k: float
    displacement_d: float
    sigma2: float
    pairwise_cov: float = 0.0
    visibility: float = 1.0
    polarization: PolarizationModel = PolarizationModel.GHZ

    def __post_init__(self):
        n = self.n_photons
        if isinstance(n, bool) or int(n) != n or n < 1:
            raise ProbeError(f"n_photons must be a positive integer, got {n!r}")
        object.__setattr__(self, "n_photons", int(n))
        for name in ("wavenumber_k", "displacement_d", "sigma2", "pairwise_cov", "visibility"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ProbeError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.wavenumber_k <= 0:
            raise ProbeError(f"wavenumber must be positive, got {self.wavenumber_k}")
        if self.sigma2 <= 0:
            raise ProbeError(f"sigma2 must be positive, got {self.sigma2}")
        if not 0.0 <= self.visibility <= 1.0:
            raise ProbeError(f"visibility must lie in [0, 1], got {self.visibility}")
        if self.n_photons == 1:
            object.__setattr__(self, "pairwise_cov", 0.0)
            return
        slack = PSD_RTOL * self.sigma2
        if abs(self.pairwise_cov) > self.sigma2 + slack:
            raise ProbeError(f"|cov| = {abs(self.pairwise_cov)} exceeds sigma2 = {self.sigma2}")
        # eigenvalues of the uniform matrix: sigma2 - cov and sigma2 + (n-1) cov
        if self.sigma2 + (self.n_photons - 1) * self.pairwise_cov < -slack * self.n_photons:
            raise ProbeError(
                f"covariance matrix not positive semidefinite: cov = {self.pairwise_cov} "
                f"< -sigma2/(n-1) = {-self.sigma2 / (self.n_photons - 1)}"
            )

    @property
    def sigma2_ell(self) -> float:
        """Effective variance sigma_(N)^2 = sigma2 + (N-1) cov."""
        return self.sigma2 + (self.n_photons - 1) * self.pairwise_cov

    def replace(self, **changes) -> "ProbeConfig":
        return replace(self, **changes)


def make_probe(n, k, d, sigma2, cov=0.0, visibility=1.0) -> ProbeConfig:
    """Build a validated probe; arguments are SI."""
    return ProbeConfig(
        n_photons=n,
        wavenumber_k=k,
        displacement_d=d,
        sigma2=sigma2,
        pairwise_cov=cov,
        visibility=visibility,
    )


def correlation_coefficient(probe: ProbeConfig) -> float:
    """C = Cov[x1, x2] / sigma^2."""
    if probe.n_photons < 2:
        raise ProbeError("correlation coefficient is undefined for a single photon")
    return probe.pairwise_cov / probe.sigma2


def spatial_state(probe: ProbeConfig) -> GaussianSpatialState:
    n = probe.n_photons
    cov = np.full((n, n), probe.pairwise_cov)
    np.fill_diagonal(cov, probe.sigma2)
    return GaussianSpatialState(mean=np.full(n, probe.displacement_d), covariance=cov)
