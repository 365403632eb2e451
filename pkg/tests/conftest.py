import math
import os

import pytest
from hypothesis import settings

from hypertilt.probe import make_probe, wavenumber_from_nm

settings.register_profile("thorough", max_examples=1000, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

K650 = wavenumber_from_nm(650.0)
MM, MM2, URAD = 1e-3, 1e-6, 1e-6

# laboratory parameters: single-photon beam, photon-pair beam and the d ~ 6 mm pair run
SIGMA2_SINGLE = 0.65 * MM2
SIGMA2_PAIR = 0.70 * MM2
SIGMA2_PAIR_ELL = 1.22 * MM2
COV_PAIR = SIGMA2_PAIR_ELL - SIGMA2_PAIR
D_LARGE = 5.97 * MM
V_PAIR = 0.77


def single_probe(d, visibility=V_PAIR):
    return make_probe(1, K650, d, SIGMA2_SINGLE, 0.0, visibility)


def pair_probe(d, visibility=V_PAIR):
    return make_probe(2, K650, d, SIGMA2_PAIR, COV_PAIR, visibility)


def acceptance_grid(probe, points=101):
    """+-3 fringe periods or +-3/(k sigma_(N)), whichever is smaller."""
    import numpy as np

    from hypertilt.model import fringe_period

    half = min(3 * fringe_period(probe), 3.0 / (probe.wavenumber_k * math.sqrt(probe.sigma2_ell)))
    return np.linspace(-half, half, points)


@pytest.fixture
def wide_pair_probe():
    return pair_probe(D_LARGE)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
