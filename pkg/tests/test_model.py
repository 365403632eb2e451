import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypertilt.model import (
    FringeCurve,
    coherence,
    fringe_period,
    fringe_scan,
    probability_derivative,
    projection_probability,
)
from hypertilt.oracle import quadrature_probability
from hypertilt.probe import make_probe

from conftest import D_LARGE, K650, URAD

# values frozen from scipy.integrate.quad of the density-weighted cos^2(2 k theta x)
QUAD_L1_D0 = 0.9615581731933179
QUAD_L1_D5 = 0.3079240263431226
QUAD_L2_RANK1 = 0.8630745185368455
QUAD_L2_COH_MAG = 0.7261490370736909


def test_coherence_at_zero():
    c = coherence(make_probe(1, 1, 0.3, 1.0, visibility=0.8), 0.0)
    assert c.magnitude == 0.8
    assert c.phase == 0.0


def test_coherence_single_photon():
    c = coherence(make_probe(1, 1, 0.0, 1.0), 0.1)
    assert c.magnitude == pytest.approx(math.exp(-0.08), rel=1e-14)
    assert c.magnitude == pytest.approx(0.923116, abs=1e-6)
    assert c.phase == 0.0


def test_coherence_pair_rank_one():
    c = coherence(make_probe(2, 1, 0.5, 1.0, 1.0), 0.1)
    assert c.magnitude == pytest.approx(QUAD_L2_COH_MAG, rel=1e-12)
    assert c.phase == pytest.approx(0.4, rel=1e-14)


@pytest.mark.parametrize(
    "probe, theta, expected",
    [
        (make_probe(1, 1, 0.0, 1.0), 0.1, QUAD_L1_D0),
        (make_probe(1, 1, 5.0, 1.0), 0.1, QUAD_L1_D5),
        (make_probe(2, 1, 0.0, 1.0, 1.0), 0.1, QUAD_L2_RANK1),
    ],
)
def test_projection_probability_against_frozen_quadrature(probe, theta, expected):
    assert projection_probability(probe, theta) == pytest.approx(expected, abs=1e-12)


def test_probability_at_zero():
    assert projection_probability(make_probe(2, K650, 1e-3, 1e-6, 0.5e-6, 1.0), 0.0) == 1.0
    assert projection_probability(make_probe(2, K650, 1e-3, 1e-6, 0.5e-6, 0.77), 0.0) == pytest.approx(0.885)


def test_single_point_scan():
    curve = fringe_scan(make_probe(2, K650, 1e-3, 1e-6, 0.5e-6, 0.77), [0.0])
    assert len(curve) == 1
    assert curve.probability[0] == pytest.approx(0.885)


def test_scan_rejects_bad_grids():
    probe = make_probe(1, 1, 0, 1)
    with pytest.raises(ValueError):
        fringe_scan(probe, [])
    with pytest.raises(ValueError):
        fringe_scan(probe, [0.0, 0.0])
    with pytest.raises(ValueError):
        fringe_scan(probe, [0.1, 0.0])


def test_period_of_wide_pair_scan(wide_pair_probe):
    theta = np.linspace(-50, 50, 201) * URAD
    p = fringe_scan(wide_pair_probe, theta).probability
    assert fringe_period(wide_pair_probe) == pytest.approx(2 * math.pi / (8 * K650 * D_LARGE))
    assert fringe_period(wide_pair_probe) / URAD == pytest.approx(13.6, abs=0.05)
    # zeros of p - 1/2 are those of the cosine; the envelope cannot move them
    y = p - 0.5
    idx = np.flatnonzero(y[:-1] * y[1:] < 0)
    zeros = theta[idx] - y[idx] * (theta[idx + 1] - theta[idx]) / (y[idx + 1] - y[idx])
    measured = 2 * np.mean(np.diff(zeros))
    assert abs(measured - fringe_period(wide_pair_probe)) <= theta[1] - theta[0]


def test_zero_displacement_is_monotone_in_abs_theta():
    probe = make_probe(2, K650, 0.0, 0.7e-6, 0.52e-6, 0.77)
    theta = np.linspace(0, 100, 201) * URAD
    p = fringe_scan(probe, theta).probability
    assert np.all(np.diff(p) < 0)
    assert p[-1] == pytest.approx(0.5, abs=1e-6)


def test_analytic_derivative_matches_difference():
    probe = make_probe(2, K650, 2e-3, 0.7e-6, 0.52e-6, 0.77)
    theta = np.linspace(-20, 20, 41) * URAD + 0.37 * URAD
    h = 1e-11
    fd = (projection_probability(probe, theta + h) - projection_probability(probe, theta - h)) / (2 * h)
    np.testing.assert_allclose(probability_derivative(probe, theta), fd, rtol=1e-5, atol=1e-3)


def test_fringe_curve_validation():
    with pytest.raises(ValueError):
        FringeCurve(theta=[0.0, 1.0])
    with pytest.raises(ValueError):
        FringeCurve(theta=[0.0, 1.0], successes=[3, 5], trials=[4, 4])
    with pytest.raises(ValueError):
        FringeCurve(theta=[0.0, 1.0], probability=[0.5, 1.2])
    c = FringeCurve(theta=[0.0, 1.0], successes=[1, 2], trials=[4, 4])
    np.testing.assert_allclose(c.frequencies(), [0.25, 0.5])


probes = st.builds(
    lambda n, c, d, v, s2: make_probe(n, K650, d, s2, c * s2 if n > 1 else 0.0, v),
    st.integers(1, 2),
    st.floats(-1.0, 1.0),
    st.floats(-8e-3, 8e-3),
    st.floats(0.0, 1.0),
    st.floats(0.1e-6, 3e-6),
)


@given(probes, st.floats(-200e-6, 200e-6))
def test_parity_and_bounds(probe, theta):
    p = projection_probability(probe, theta)
    assert p == projection_probability(probe, -theta)
    v = probe.visibility
    assert 0.5 * (1 - v) - 1e-15 <= p <= 0.5 * (1 + v) + 1e-15


@given(st.floats(0.1, 3.0), st.just(0.0) | st.floats(1e-6, 2.0), st.floats(1e-2, 0.5))
def test_reduction_to_bloch_picture(sigma2, d, theta):
    one = make_probe(1, 1.0, d, sigma2)
    two = make_probe(2, 1.0, d, sigma2, sigma2)
    c1, c2 = coherence(one, theta), coherence(two, theta)
    assert c1.magnitude == pytest.approx(math.exp(-8 * sigma2 * theta**2), rel=1e-12)
    assert c1.phase == pytest.approx(4 * theta * d, rel=1e-12, abs=1e-300)
    # perfectly correlated pair: exponent ratio 2 sigma_(2)^2 / sigma^2 = 4, phase ratio 2
    assert math.log(c2.magnitude) / math.log(c1.magnitude) == pytest.approx(2 * two.sigma2_ell / sigma2, rel=1e-10)
    if d > 0:
        assert c2.phase / c1.phase == pytest.approx(2.0, rel=1e-14)


@given(probes.filter(lambda p: p.n_photons <= 2), st.floats(-1.0, 1.0))
def test_quadrature_oracle_equivalence(probe, u):
    theta = u * 3.0 / (probe.wavenumber_k * math.sqrt(max(probe.sigma2_ell, probe.sigma2)))
    assert abs(projection_probability(probe, theta) - quadrature_probability(probe, theta)) <= 1e-6
