"""Hyperentanglement-enhanced mirror-tilt sensing: forward model, Fisher
information, brute-force oracles and a synthetic estimation pipeline."""

__version__ = "0.1.0"

from .fisher import (  # noqa: E402
    FisherReport,
    cfi_analytic,
    cfi_binary,
    crb_variance,
    fisher_report,
    qfi,
    scaling_sweep,
    shot_noise_baseline,
)
from .model import CoherenceFactor, FringeCurve, coherence, fringe_scan, projection_probability  # noqa: E402
from .probe import (  # noqa: E402
    GaussianSpatialState,
    PolarizationModel,
    ProbeConfig,
    ProbeError,
    correlation_coefficient,
    make_probe,
    spatial_state,
)

__all__ = [
    "CoherenceFactor",
    "FisherReport",
    "FringeCurve",
    "GaussianSpatialState",
    "PolarizationModel",
    "ProbeConfig",
    "ProbeError",
    "cfi_analytic",
    "cfi_binary",
    "coherence",
    "correlation_coefficient",
    "crb_variance",
    "fisher_report",
    "fringe_scan",
    "make_probe",
    "projection_probability",
    "qfi",
    "scaling_sweep",
    "shot_noise_baseline",
    "spatial_state",
]
