"""Time dependent cavity coupling envelopes.

The atom crosses the two cavity waists in sequence, so each cavity sees a
pulsed vacuum Rabi coupling g_i(t).  Two envelope shapes are supported:

* ``square``  -- constant g_peak on [center - width, center + width]
* ``gaussian`` -- g_peak * exp(-((t - center) / width)**2)

The two-photon transition driven by cavity 1 oscillates at 2*sqrt(2)*g1,
the single-photon transition driven by cavity 2 at 2*g2; those factors are
exposed as constants so pulse areas can be calibrated to pi.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

SQUARE = "square"
GAUSSIAN = "gaussian"
SHAPES = (SQUARE, GAUSSIAN)

# Rabi frequency per unit coupling for the transition each cavity drives.
CAVITY1_RABI_FACTOR = 2.0 * math.sqrt(2.0)
CAVITY2_RABI_FACTOR = 2.0


@dataclass(frozen=True)
class PulseSchedule:
    """One cavity's coupling envelope g(t)."""

    shape: str
    g_peak: float
    center: float
    width: float

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown pulse shape {self.shape!r}")
        if not self.width > 0.0:
            raise ValueError("pulse width must be positive")
        if self.g_peak < 0.0:
            raise ValueError("g_peak must be non-negative")

    def value(self, t):
        """Envelope at time t (scalar or array)."""
        t = np.asarray(t, dtype=float)
        if self.shape == SQUARE:
            inside = np.abs(t - self.center) <= self.width
            out = np.where(inside, self.g_peak, 0.0)
        else:
            x = (t - self.center) / self.width
            out = self.g_peak * np.exp(-x * x)
        if out.ndim == 0:
            return float(out)
        return out

    @property
    def area(self) -> float:
        """Integral of g(t) over all time (closed form)."""
        if self.shape == SQUARE:
            return 2.0 * self.g_peak * self.width
        return self.g_peak * self.width * math.sqrt(math.pi)

    def support(self, pad: float = 4.0) -> tuple[float, float]:
        """Interval outside which the envelope is (numerically) negligible.

        Square pulses have exact support; gaussians are cut at pad widths,
        where the relative amplitude is exp(-pad**2).
        """
        if self.shape == SQUARE:
            return (self.center - self.width, self.center + self.width)
        return (self.center - pad * self.width, self.center + pad * self.width)

    def breakpoints(self) -> tuple[float, ...]:
        """Times where the envelope is discontinuous (square edges only)."""
        if self.shape == SQUARE:
            return (self.center - self.width, self.center + self.width)
        return ()


def evaluate(schedule: PulseSchedule, t):
    return schedule.value(t)


def pulse_area(schedule: PulseSchedule, rabi_factor: float) -> float:
    """Rabi area rabi_factor * integral(g dt) of the driven transition."""
    return rabi_factor * schedule.area


def calibrate_pi(schedule: PulseSchedule, rabi_factor: float) -> PulseSchedule:
    """Rescale g_peak so the pulse area is exactly pi."""
    area = pulse_area(schedule, rabi_factor)
    if area <= 0.0:
        raise ValueError("cannot calibrate a pulse with zero area")
    return replace(schedule, g_peak=schedule.g_peak * math.pi / area)


def width_for_pi(g_peak: float, shape: str, rabi_factor: float) -> float:
    """Width that makes the pulse area pi at fixed peak coupling."""
    if g_peak <= 0.0:
        raise ValueError("g_peak must be positive to fix the width")
    if shape == SQUARE:
        return math.pi / (2.0 * rabi_factor * g_peak)
    if shape == GAUSSIAN:
        return math.pi / (rabi_factor * g_peak * math.sqrt(math.pi))
    raise ValueError(f"unknown pulse shape {shape!r}")


def stirap_schedule(
    g_peak: float,
    tau: float,
    delay: float,
    center2: float | None = None,
) -> tuple[PulseSchedule, PulseSchedule]:
    """Counterintuitive gaussian pair for adiabatic passage.

    The cavity-2 pulse comes first (center2), the cavity-1 pulse follows at
    center2 + delay.  Both share the width tau and the peak g_peak.  A
    non-positive delay gives intuitive ordering, which defeats the adiabatic
    transfer; it is allowed for negative tests but flagged.
    """
    if center2 is None:
        center2 = 2.0 * tau
    if delay <= 0.0:
        warnings.warn("delay <= 0 gives intuitive pulse ordering", stacklevel=2)
    s1 = PulseSchedule(GAUSSIAN, g_peak, center2 + delay, tau)
    s2 = PulseSchedule(GAUSSIAN, g_peak, center2, tau)
    return s1, s2


def mixing_angle(schedule1: PulseSchedule, schedule2: PulseSchedule, t):
    """Dark-state mixing angle theta(t) = atan(sqrt(2) g1 / g2) in [0, pi/2].

    Where both envelopes vanish exactly (square gaps, far gaussian tails)
    the angle is taken by continuity from the nearest point of support;
    before either pulse has begun this gives theta = 0.
    """
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    g1 = np.atleast_1d(schedule1.value(t))
    g2 = np.atleast_1d(schedule2.value(t))
    dead = (g1 == 0.0) & (g2 == 0.0)
    if np.any(dead) and (schedule1.g_peak > 0.0 or schedule2.g_peak > 0.0):
        los, his = zip(schedule1.support(), schedule2.support())
        clamped = np.clip(t[dead], min(los), max(his))
        g1 = g1.copy()
        g2 = g2.copy()
        g1[dead] = np.atleast_1d(schedule1.value(clamped))
        g2[dead] = np.atleast_1d(schedule2.value(clamped))
    theta = np.arctan2(math.sqrt(2.0) * g1, g2)
    if scalar:
        return float(theta[0])
    return theta
