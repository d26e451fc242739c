"""Envelope shapes, pulse-area calibration, and the STIRAP pulse pair."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from pairsource import pulses
from pairsource.pulses import (CAVITY1_RABI_FACTOR, CAVITY2_RABI_FACTOR,
                               PulseSchedule, calibrate_pi, mixing_angle,
                               pulse_area, stirap_schedule, width_for_pi)


def test_square_value_and_area():
    s = PulseSchedule("square", 0.3, 2.0, 0.5)
    assert s.value(2.0) == 0.3
    assert s.value(1.5) == 0.3  # edges inclusive
    assert s.value(2.5) == 0.3
    assert s.value(1.49) == 0.0
    assert s.value(2.51) == 0.0
    assert s.area == pytest.approx(0.3, abs=0.0)
    assert s.support() == (1.5, 2.5)
    assert s.breakpoints() == (1.5, 2.5)


def test_gaussian_value_and_area_against_quadrature():
    s = PulseSchedule("gaussian", 0.7, 5.0, 1.3)
    assert s.value(5.0) == pytest.approx(0.7, abs=1e-15)
    assert s.value(5.0 + 1.3) == pytest.approx(0.7 * math.exp(-1.0), rel=1e-14)
    num, err = quad(s.value, -60.0, 60.0, limit=200)
    assert err < 1e-8
    assert s.area == pytest.approx(num, abs=1e-9)
    assert s.breakpoints() == ()
    lo, hi = s.support(pad=4.0)
    assert s.value(hi) == pytest.approx(0.7 * math.exp(-16.0), rel=1e-12)


def test_value_vectorized_matches_scalar():
    s = PulseSchedule("gaussian", 1.1, 0.0, 0.4)
    t = np.linspace(-2.0, 2.0, 41)
    vec = s.value(t)
    assert vec.shape == t.shape
    assert np.array_equal(vec, np.array([s.value(float(x)) for x in t]))


def test_calibrate_pi_property_loop():
    rng = np.random.default_rng(1234)
    for _ in range(25):
        shape = "square" if rng.random() < 0.5 else "gaussian"
        s = PulseSchedule(shape, rng.uniform(0.05, 3.0), rng.uniform(-5, 5),
                          rng.uniform(0.1, 4.0))
        factor = float(rng.uniform(0.5, 4.0))
        cal = calibrate_pi(s, factor)
        assert pulse_area(cal, factor) == pytest.approx(math.pi, abs=1e-12)
        assert cal.width == s.width and cal.center == s.center


def test_width_for_pi_both_shapes():
    for shape in ("square", "gaussian"):
        for factor in (CAVITY1_RABI_FACTOR, CAVITY2_RABI_FACTOR):
            w = width_for_pi(0.8, shape, factor)
            s = PulseSchedule(shape, 0.8, 0.0, w)
            assert pulse_area(s, factor) == pytest.approx(math.pi, abs=1e-12)
    with pytest.raises(ValueError):
        width_for_pi(0.0, "square", 2.0)
    with pytest.raises(ValueError):
        width_for_pi(1.0, "triangle", 2.0)


def test_schedule_validation():
    with pytest.raises(ValueError):
        PulseSchedule("sinc", 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        PulseSchedule("square", 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        PulseSchedule("square", -0.1, 0.0, 1.0)
    with pytest.raises(ValueError):
        calibrate_pi(PulseSchedule("square", 0.0, 0.0, 1.0), 2.0)


def test_stirap_schedule_counterintuitive_order():
    s1, s2 = stirap_schedule(1.0, 3.0, 3.3, 12.0)
    assert s2.center == 12.0  # cavity 2 first
    assert s1.center == pytest.approx(15.3)
    assert s1.width == s2.width == 3.0
    assert s1.g_peak == s2.g_peak == 1.0
    s1d, s2d = stirap_schedule(1.0, 3.0, 3.0)
    assert s2d.center == pytest.approx(6.0)  # default center2 = 2 tau
    with pytest.warns(UserWarning):
        stirap_schedule(1.0, 3.0, -1.0, 12.0)


def test_mixing_angle_limits_and_identity():
    tau = 2.0
    s1, s2 = stirap_schedule(0.9, tau, 1.2 * tau, 8.0)
    early = mixing_angle(s1, s2, 8.0 - 30 * tau)
    late = mixing_angle(s1, s2, 8.0 + 1.2 * tau + 30 * tau)
    assert early < 1e-2
    assert late > math.pi / 2 - 1e-2
    for t in np.linspace(6.0, 12.0, 13):
        g1, g2 = s1.value(float(t)), s2.value(float(t))
        want = math.atan2(math.sqrt(2.0) * g1, g2)
        assert mixing_angle(s1, s2, float(t)) == pytest.approx(want, abs=1e-14)
    arr = mixing_angle(s1, s2, np.array([6.0, 8.0, 10.0]))
    assert arr.shape == (3,)


def test_mixing_angle_monotone_through_transfer():
    tau = 3.0
    s1, s2 = stirap_schedule(1.0, tau, tau, 4 * tau)
    t = np.linspace(4 * tau - 2 * tau, 4 * tau + 3 * tau, 200)
    theta = mixing_angle(s1, s2, t)
    assert np.all(np.diff(theta) > -1e-12)
