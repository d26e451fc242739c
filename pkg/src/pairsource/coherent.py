"""Lossless Schrodinger evolution under the time-dependent coupling pulses.

Fixed-step RK4 on a precomputed step plan.  The plan splits the time span
at every pulse breakpoint (square edges) and at every snapshot time, so
discontinuities always land on step boundaries and the recorded grid never
interpolates.  Envelope values at RK4 stage times are evaluated with the
stage clamped into the interior of its segment; a step that starts exactly
on a square falling edge therefore sees the pulse off for the whole step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import pulses
from .statespace import Basis, ManifoldBasis, SystemParams, operator_set

MAX_STEPS = 20_000_000

_SEG_EPS = 1e-12  # relative interior margin for clamped stage evaluation


def default_dt_max(params: SystemParams) -> float:
    """1/50 of the fastest oscillation period in angular units.

    The relevant rates are the two vacuum Rabi frequencies (2*sqrt(2)*g1
    for the doubly occupied cavity-1 transition, 2*g2 for cavity 2), the
    detunings and the decay rates.
    """
    omega = max(
        pulses.CAVITY1_RABI_FACTOR * params.schedule1.g_peak,
        pulses.CAVITY2_RABI_FACTOR * params.schedule2.g_peak,
        abs(params.delta_plus),
        abs(params.delta_minus),
        params.gamma,
        params.kappa,
    )
    if omega <= 0.0:
        raise ValueError("no finite timescale: all couplings, detunings and rates are zero")
    return 1.0 / (50.0 * omega)


def segment_clamp(lo: float, hi: float, t):
    """Clamp stage times into the open interior of the segment (lo, hi)."""
    eps = (hi - lo) * _SEG_EPS
    return np.clip(t, lo + eps, hi - eps)


@dataclass(frozen=True)
class StepPlan:
    """Precomputed RK4 steps with per-step envelope stage values.

    snap_after[k] is the index of the step whose end lands on snapshot k;
    -1 marks the snapshot at t_start.
    """

    t_start: float
    t_end: float
    t0: np.ndarray
    h: np.ndarray
    clamp_lo: np.ndarray
    clamp_hi: np.ndarray
    g1_stages: np.ndarray
    g2_stages: np.ndarray
    snap_times: np.ndarray
    snap_after: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.t0.size


def build_step_plan(params: SystemParams, t_span, dt_max: float | None = None,
                    n_points: int = 1000) -> StepPlan:
    t_start, t_end = float(t_span[0]), float(t_span[1])
    if not (math.isfinite(t_start) and math.isfinite(t_end)) or t_end <= t_start:
        raise ValueError(f"bad time span ({t_start}, {t_end})")
    if n_points < 2:
        raise ValueError("need at least two snapshot points")
    if dt_max is None:
        dt_max = default_dt_max(params)
    if dt_max <= 0.0:
        raise ValueError("dt_max must be positive")

    span = t_end - t_start
    tol = span * 1e-12
    snap_times = np.linspace(t_start, t_end, n_points)

    pts = [t_start, t_end]
    for sched in (params.schedule1, params.schedule2):
        pts.extend(b for b in sched.breakpoints() if t_start < b < t_end)
    pts.extend(snap_times)
    pts = np.sort(np.asarray(pts, dtype=float))
    bounds = [pts[0]]
    for p in pts[1:]:
        if p - bounds[-1] > tol:
            bounds.append(p)
    bounds[-1] = t_end  # guard against the merge swallowing the endpoint

    t0_parts, h_parts, lo_parts, hi_parts = [], [], [], []
    total = 0
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        width = hi - lo
        n = max(1, int(math.ceil(width / dt_max - 1e-9)))
        total += n
        if total > MAX_STEPS:
            raise RuntimeError(
                f"step plan exceeds {MAX_STEPS} steps near t={lo:.6g}; increase dt_max")
        edges = lo + width * np.arange(n + 1) / n
        edges[-1] = hi
        h = np.diff(edges)
        if np.any(edges[:-1] + h <= edges[:-1]):
            bad = edges[:-1][edges[:-1] + h <= edges[:-1]][0]
            raise RuntimeError(f"step size underflows at t={bad!r}")
        t0_parts.append(edges[:-1])
        h_parts.append(h)
        lo_parts.append(np.full(n, lo))
        hi_parts.append(np.full(n, hi))

    t0 = np.concatenate(t0_parts)
    h = np.concatenate(h_parts)
    clamp_lo = np.concatenate(lo_parts)
    clamp_hi = np.concatenate(hi_parts)

    # stage times t, t+h/2, t+h, clamped into the segment interior
    stage_t = t0[:, None] + h[:, None] * np.array([0.0, 0.5, 1.0])
    eps = (clamp_hi - clamp_lo) * _SEG_EPS
    stage_t = np.clip(stage_t, (clamp_lo + eps)[:, None], (clamp_hi - eps)[:, None])
    g1_stages = params.schedule1.value(stage_t)
    g2_stages = params.schedule2.value(stage_t)

    ends = t0 + h
    snap_after = np.empty(snap_times.size, dtype=int)
    snap_after[0] = -1
    idx = np.searchsorted(ends, snap_times[1:] - tol)
    if np.any(np.abs(ends[idx] - snap_times[1:]) > 2 * tol):
        raise RuntimeError("snapshot grid does not align with step boundaries")
    snap_after[1:] = idx

    return StepPlan(t_start, t_end, t0, h, clamp_lo, clamp_hi,
                    g1_stages, g2_stages, snap_times, snap_after)


def rk4_step(x: np.ndarray, h: float, a0: np.ndarray, a1: np.ndarray,
             a2: np.ndarray) -> np.ndarray:
    """One classical RK4 step of dx/dt = A(t) x with A frozen per stage."""
    k1 = a0 @ x
    k2 = a1 @ (x + (0.5 * h) * k1)
    k3 = a1 @ (x + (0.5 * h) * k2)
    k4 = a2 @ (x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


class Generator:
    """Builds the per-stage propagation matrix A = -i H(t).

    hstat collects everything time independent: detunings and, for the
    dissipative no-jump variant, the -i/2 * (decay rates) diagonal.
    """

    def __init__(self, basis: Basis, params: SystemParams,
                 decay_diag: np.ndarray | None = None):
        ops = operator_set(basis)
        hstat = (-params.delta_plus) * ops.proj_a + (-params.delta_minus) * ops.proj_b
        if decay_diag is not None:
            hstat = hstat - 0.5j * np.diag(decay_diag)
        self.base = -1j * hstat
        self.w1 = -1j * ops.coupling1
        self.w2 = -1j * ops.coupling2
        self.schedule1 = params.schedule1
        self.schedule2 = params.schedule2

    def stage_matrices(self, g1_stage, g2_stage):
        return tuple(self.base + g1_stage[s] * self.w1 + g2_stage[s] * self.w2
                     for s in range(3))

    def matrices_at(self, lo: float, hi: float, t_a: float, h: float):
        """Stage matrices for a partial step [t_a, t_a + h] inside segment (lo, hi)."""
        st = segment_clamp(lo, hi, np.array([t_a, t_a + 0.5 * h, t_a + h]))
        g1 = self.schedule1.value(st)
        g2 = self.schedule2.value(st)
        return self.stage_matrices(g1, g2)


@dataclass(frozen=True, eq=False)
class CoherentTrajectory:
    """State snapshots on the recorded grid; rows of states are psi(t)."""

    times: np.ndarray
    states: np.ndarray
    basis: Basis
    params: SystemParams

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def basis_populations(self) -> np.ndarray:
        return np.abs(self.states) ** 2

    def manifold_populations(self, manifold: ManifoldBasis) -> np.ndarray:
        """Populations of the five pair-manifold states, columns in names order."""
        amps = self.states @ manifold.matrix.conj().T
        return np.abs(amps) ** 2


def evolve(psi0: np.ndarray, basis: Basis, params: SystemParams, t_span,
           dt_max: float | None = None, n_points: int = 1000) -> CoherentTrajectory:
    """Integrate the lossless Schrodinger equation from psi0 over t_span."""
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (basis.dim,):
        raise ValueError(f"psi0 must have shape ({basis.dim},)")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-9:
        raise ValueError("psi0 must be normalized")
    plan = build_step_plan(params, t_span, dt_max, n_points)
    gen = Generator(basis, params)
    out = np.empty((plan.snap_times.size, basis.dim), dtype=complex)
    x = psi0.copy()
    ptr = 0
    while ptr < plan.snap_after.size and plan.snap_after[ptr] == -1:
        out[ptr] = x
        ptr += 1
    for j in range(plan.n_steps):
        a0, a1, a2 = gen.stage_matrices(plan.g1_stages[j], plan.g2_stages[j])
        x = rk4_step(x, plan.h[j], a0, a1, a2)
        while ptr < plan.snap_after.size and plan.snap_after[ptr] == j:
            out[ptr] = x
            ptr += 1
    return CoherentTrajectory(plan.snap_times.copy(), out, basis, params)


def rabi_oracle(g1: float, delta: float, t):
    """Closed-form amplitudes for the first stage at constant coupling g1.

    With cavity 2 off, |I> couples only to |B> with matrix element
    sqrt(2)*g1 and the bright state sits at energy -delta; the populations
    oscillate at the generalized Rabi frequency sqrt(8 g1^2 + delta^2).
    Returns the amplitude pair (c_B, c_I) at times t for the state
    starting in |I>.
    """
    t = np.asarray(t, dtype=float)
    omega = math.sqrt(8.0 * g1 ** 2 + delta ** 2)
    if omega == 0.0:
        one = np.ones_like(t, dtype=complex)
        return np.zeros_like(t, dtype=complex), one
    phase = np.exp(0.5j * delta * t)
    c_i = phase * (np.cos(0.5 * omega * t) - 1j * (delta / omega) * np.sin(0.5 * omega * t))
    c_b = phase * (-1j * (2.0 * math.sqrt(2.0) * g1 / omega) * np.sin(0.5 * omega * t))
    return c_b, c_i


def dark_state(theta: float, manifold: ManifoldBasis) -> np.ndarray:
    """cos(theta)|I> - sin(theta)|E+>, the adiabatic transfer state."""
    return math.cos(theta) * manifold.initial - math.sin(theta) * manifold.bell_plus


@dataclass(frozen=True)
class AdiabaticityReport:
    """How well a transfer stayed on the dark state."""

    max_p_bright: float
    max_p_dark: float
    final_p_bell_plus: float


def adiabaticity_report(trajectory: CoherentTrajectory,
                        manifold: ManifoldBasis) -> AdiabaticityReport:
    pops = trajectory.manifold_populations(manifold)
    return AdiabaticityReport(
        max_p_bright=float(pops[:, 1].max()),
        max_p_dark=float(pops[:, 2].max()),
        final_p_bell_plus=float(pops[-1, 3]),
    )
