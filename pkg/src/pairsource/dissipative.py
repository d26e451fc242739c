"""Open-system dynamics: quantum-trajectory unraveling and a Lindblad oracle.

The conditional state evolves under the non-hermitian

    H' = H(t) - i(Gamma/2)(S+^dag S+ + S-^dag S-) - i(kappa/2) sum a^dag a

with its norm decaying; a quantum jump fires when the squared norm drops
below a pre-drawn uniform threshold, the channel is picked with probability
proportional to Gamma or kappa times ||C psi||^2, and the state is
renormalized.  Jump times are located by bisection to 1e-6 of a step.

Determinism contract: trajectory i draws its randomness from a generator
seeded with trajectory_seed(master_seed, i) (a splitmix64 output, see
below), trajectories are processed in fixed chunks of 256, and ensemble
reduction runs in chunk-index order.  Results are therefore bit-identical
for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator as NPGenerator, PCG64

from .coherent import Generator, StepPlan, build_step_plan, rk4_step
from .statespace import Basis, ManifoldBasis, SparseOperator, SystemParams, operator_set

CHANNELS = ("gamma+", "gamma-", "kappa1+", "kappa1-", "kappa2+", "kappa2-")

CHUNK = 256  # fixed trajectory chunk size; part of the determinism contract

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def trajectory_seed(master_seed: int, i: int) -> int:
    """Seed for trajectory i: splitmix64 output i of the stream at master_seed.

    z_i = mix64(master_seed + (i+1)*0x9E3779B97F4A7C15 mod 2^64) with the
    standard finalizer (shift-xor 30/27/31, multipliers 0xBF58476D1CE4E5B9
    and 0x94D049BB133111EB).
    """
    z = (int(master_seed) + (i + 1) * _GOLDEN) & _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def decay_rates_diag(basis: Basis, params: SystemParams) -> np.ndarray:
    """Diagonal of the total decay-rate operator Gamma*(Pa+Pb) + kappa*n."""
    ops = operator_set(basis)
    atomic = np.real(np.diag(ops.proj_a) + np.diag(ops.proj_b))
    return params.gamma * atomic + params.kappa * ops.number_diag


def effective_hamiltonian(basis: Basis, params: SystemParams, t: float) -> SparseOperator:
    """H'(t) = H(t) - (i/2) * decay-rate diagonal (non-hermitian)."""
    from .statespace import hamiltonian

    h = hamiltonian(basis, params, t).to_dense()
    h = h - 0.5j * np.diag(decay_rates_diag(basis, params))
    return SparseOperator.from_dense(h)


@dataclass(frozen=True)
class CollapseChannel:
    name: str
    rate: float
    operator: SparseOperator  # scaled: sqrt(rate) * bare lowering operator


def collapse_operators(basis: Basis, params: SystemParams) -> tuple[CollapseChannel, ...]:
    """The six jump channels in fixed order, zero-rate channels included."""
    from .statespace import atomic_lowering, mode_annihilator

    bare = [
        atomic_lowering(basis, "+"),
        atomic_lowering(basis, "-"),
        mode_annihilator(basis, "1+"),
        mode_annihilator(basis, "1-"),
        mode_annihilator(basis, "2+"),
        mode_annihilator(basis, "2-"),
    ]
    rates = [params.gamma, params.gamma, params.kappa, params.kappa,
             params.kappa, params.kappa]
    out = []
    for name, rate, op in zip(CHANNELS, rates, bare):
        root = math.sqrt(rate)
        scaled = SparseOperator(op.dim, tuple((r, c, root * v) for r, c, v in op.entries))
        out.append(CollapseChannel(name, rate, scaled))
    return tuple(out)


@dataclass(frozen=True)
class JumpRecord:
    trajectory: int
    time: float
    channel: str


@dataclass(frozen=True, eq=False)
class TrajectoryResult:
    seed: int
    times: np.ndarray
    basis_populations: np.ndarray     # (n_snap, dim), conditional (normalized)
    manifold_populations: np.ndarray  # (n_snap, 5)
    norm2: np.ndarray                 # squared conditional norm since last jump
    jumps: tuple[JumpRecord, ...]
    final_state: np.ndarray           # normalized conditional state at t_end
    final_norm2: float


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    n_traj: int
    master_seed: int
    seeds: np.ndarray
    times: np.ndarray
    avg_basis_populations: np.ndarray     # (n_snap, dim), mean conditional populations
    avg_manifold_populations: np.ndarray  # (n_snap, 5)
    n_jumps: np.ndarray                   # (n_traj,)
    jumps: tuple[JumpRecord, ...]
    final_states: np.ndarray              # (n_traj, dim) normalized
    final_norm2: np.ndarray               # (n_traj,)


class _ChunkEngine:
    """Shared immutable context for propagating trajectory chunks."""

    def __init__(self, psi0, basis, params, plan: StepPlan, manifold_matrix):
        self.psi0 = psi0
        self.basis = basis
        self.plan = plan
        self.gen = Generator(basis, params, decay_diag=decay_rates_diag(basis, params))
        self.manifold = manifold_matrix  # (5, dim) rows are bra vectors
        chans = collapse_operators(basis, params)
        self.c_dense = [ch.operator.to_dense() for ch in chans]
        self.rates = np.array([ch.rate for ch in chans])

    # -- jump handling ---------------------------------------------------

    def _partial_step(self, x, lo, hi, t_a, h):
        a0, a1, a2 = self.gen.matrices_at(lo, hi, t_a, h)
        return rk4_step(x, h, a0, a1, a2)

    def _apply_jump(self, x, t, uniforms, uptr, traj, jumps):
        weights = np.array([np.vdot(c @ x, c @ x).real for c in self.c_dense])
        total = weights.sum()
        if total <= 0.0:
            raise RuntimeError(
                f"no jump channel has weight at t={t:.6g} (trajectory {traj}); "
                "this indicates an invalid state or a logic error")
        if uptr + 1 >= uniforms.size:
            raise RuntimeError(f"random budget exhausted on trajectory {traj}")
        u = uniforms[uptr]
        k = int(np.searchsorted(np.cumsum(weights) / total, u, side="right"))
        k = min(k, len(self.c_dense) - 1)
        x_new = self.c_dense[k] @ x
        x_new = x_new / np.linalg.norm(x_new)
        jumps.append(JumpRecord(traj, float(t), CHANNELS[k]))
        r_new = uniforms[uptr + 1]
        return x_new, r_new, uptr + 2

    def _advance_with_jumps(self, x_prev, j, t_a, t_b, r, uniforms, uptr, traj,
                            jumps, depth=0):
        """Advance one (partial) step, resolving any jumps inside it."""
        if depth > 4:
            raise RuntimeError(f"jump recursion overflow on trajectory {traj}")
        lo = self.plan.clamp_lo[j]
        hi = self.plan.clamp_hi[j]
        h = t_b - t_a
        x_end = self._partial_step(x_prev, lo, hi, t_a, h)
        if np.vdot(x_end, x_end).real > r:
            return x_end, r, uptr
        # bisect the jump time to 1e-6 of the step
        s_lo, s_hi = 0.0, 1.0
        for _ in range(20):
            s_mid = 0.5 * (s_lo + s_hi)
            xm = self._partial_step(x_prev, lo, hi, t_a, s_mid * h)
            if np.vdot(xm, xm).real > r:
                s_lo = s_mid
            else:
                s_hi = s_mid
        t_jump = t_a + s_hi * h
        x_at = self._partial_step(x_prev, lo, hi, t_a, s_hi * h)
        x_new, r_new, uptr = self._apply_jump(x_at, t_jump, uniforms, uptr, traj, jumps)
        if t_b - t_jump <= 0.0:
            return x_new, r_new, uptr
        return self._advance_with_jumps(x_new, j, t_jump, t_b, r_new, uniforms,
                                        uptr, traj, jumps, depth + 1)

    # -- chunk propagation -----------------------------------------------

    def run_chunk(self, traj_indices, seeds, record_series: bool = False):
        plan = self.plan
        m = len(traj_indices)
        dim = self.basis.dim
        uniforms = np.vstack([NPGenerator(PCG64(s)).random(6) for s in seeds])
        uptr = np.ones(m, dtype=int)
        thresholds = uniforms[:, 0].copy()
        x = np.repeat(self.psi0[:, None], m, axis=1)
        norm2 = np.ones(m)
        jumps: list[JumpRecord] = []
        n_snap = plan.snap_times.size
        pop_sum = np.zeros((n_snap, dim))
        man_sum = np.zeros((n_snap, 5))
        series = np.empty((n_snap, dim, m), dtype=complex) if record_series else None
        norm2_series = np.empty((n_snap, m)) if record_series else None

        def record(ptr):
            xh = x / np.sqrt(norm2)
            pop_sum[ptr] = (xh.real ** 2 + xh.imag ** 2).sum(axis=1)
            amps = self.manifold.conj() @ xh
            man_sum[ptr] = (amps.real ** 2 + amps.imag ** 2).sum(axis=1)
            if record_series:
                series[ptr] = xh
                norm2_series[ptr] = norm2

        ptr = 0
        while ptr < n_snap and plan.snap_after[ptr] == -1:
            record(ptr)
            ptr += 1

        cache_key = None
        mats = None
        for j in range(plan.n_steps):
            key = (plan.g1_stages[j, 0], plan.g1_stages[j, 1], plan.g1_stages[j, 2],
                   plan.g2_stages[j, 0], plan.g2_stages[j, 1], plan.g2_stages[j, 2])
            if key != cache_key:
                mats = self.gen.stage_matrices(plan.g1_stages[j], plan.g2_stages[j])
                cache_key = key
            x_prev = x
            x = rk4_step(x_prev, plan.h[j], *mats)
            new_norm2 = (x.real ** 2 + x.imag ** 2).sum(axis=0)
            if np.any(new_norm2 > norm2 + 1e-12):
                worst = int(np.argmax(new_norm2 - norm2))
                raise RuntimeError(
                    f"conditional norm grew at t={plan.t0[j]:.6g} on trajectory "
                    f"{traj_indices[worst]}; step size too large")
            hit = np.nonzero(new_norm2 <= thresholds)[0]
            for c in hit:
                xc, rc, up = self._advance_with_jumps(
                    x_prev[:, c].copy(), j, plan.t0[j], plan.t0[j] + plan.h[j],
                    thresholds[c], uniforms[c], int(uptr[c]), traj_indices[c], jumps)
                x[:, c] = xc
                thresholds[c] = rc
                uptr[c] = up
                new_norm2[c] = np.vdot(xc, xc).real
            norm2 = new_norm2
            while ptr < n_snap and plan.snap_after[ptr] == j:
                record(ptr)
                ptr += 1

        n_jumps = np.zeros(m, dtype=int)
        for rec in jumps:
            n_jumps[traj_indices.index(rec.trajectory)] += 1
        return {
            "pop_sum": pop_sum,
            "man_sum": man_sum,
            "jumps": jumps,
            "n_jumps": n_jumps,
            "final_states": (x / np.sqrt(norm2)).T.copy(),
            "final_norm2": norm2,
            "series": series,
            "norm2_series": norm2_series,
        }


def _make_engine(psi0, basis, params, t_span, dt_max, n_points):
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (basis.dim,):
        raise ValueError(f"psi0 must have shape ({basis.dim},)")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-9:
        raise ValueError("psi0 must be normalized")
    plan = build_step_plan(params, t_span, dt_max, n_points)
    from .statespace import manifold_basis

    mb = manifold_basis(basis) if basis.n_max >= 2 else None
    mmat = mb.matrix if mb is not None else np.zeros((5, basis.dim))
    return _ChunkEngine(psi0, basis, params, plan, mmat)


def run_trajectory(psi0, basis: Basis, params: SystemParams, t_span, seed: int,
                   dt_max: float | None = None, n_points: int = 1000) -> TrajectoryResult:
    """Single conditional trajectory driven by the given 64-bit seed."""
    eng = _make_engine(psi0, basis, params, t_span, dt_max, n_points)
    out = eng.run_chunk([0], [seed], record_series=True)
    return TrajectoryResult(
        seed=int(seed),
        times=eng.plan.snap_times.copy(),
        basis_populations=out["pop_sum"],
        manifold_populations=out["man_sum"],
        norm2=out["norm2_series"][:, 0],
        jumps=tuple(out["jumps"]),
        final_state=out["final_states"][0],
        final_norm2=float(out["final_norm2"][0]),
    )


def run_ensemble(psi0, basis: Basis, params: SystemParams, t_span, n_traj: int,
                 master_seed: int, dt_max: float | None = None,
                 n_points: int = 1000, workers: int = 1) -> EnsembleResult:
    """Average n_traj trajectories; bit-identical for any worker count."""
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    eng = _make_engine(psi0, basis, params, t_span, dt_max, n_points)
    seeds = np.array([trajectory_seed(master_seed, i) for i in range(n_traj)],
                     dtype=np.uint64)
    chunks = [(lo, min(lo + CHUNK, n_traj)) for lo in range(0, n_traj, CHUNK)]

    def work(bounds):
        lo, hi = bounds
        return eng.run_chunk(list(range(lo, hi)), [int(s) for s in seeds[lo:hi]])

    if workers == 1:
        results = [work(b) for b in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, chunks))

    n_snap = eng.plan.snap_times.size
    pop_sum = np.zeros((n_snap, basis.dim))
    man_sum = np.zeros((n_snap, 5))
    jumps: list[JumpRecord] = []
    n_jumps = np.empty(n_traj, dtype=int)
    final_states = np.empty((n_traj, basis.dim), dtype=complex)
    final_norm2 = np.empty(n_traj)
    for (lo, hi), res in zip(chunks, results):  # fixed reduction order
        pop_sum += res["pop_sum"]
        man_sum += res["man_sum"]
        jumps.extend(res["jumps"])
        n_jumps[lo:hi] = res["n_jumps"]
        final_states[lo:hi] = res["final_states"]
        final_norm2[lo:hi] = res["final_norm2"]
    return EnsembleResult(
        n_traj=n_traj,
        master_seed=int(master_seed),
        seeds=seeds,
        times=eng.plan.snap_times.copy(),
        avg_basis_populations=pop_sum / n_traj,
        avg_manifold_populations=man_sum / n_traj,
        n_jumps=n_jumps,
        jumps=tuple(jumps),
        final_states=final_states,
        final_norm2=final_norm2,
    )


def no_jump_evolve(psi0, basis: Basis, params: SystemParams, t_span,
                   dt_max: float | None = None, n_points: int = 1000):
    """Deterministic evolution under H' alone (the zero-jump branch).

    Returns (times, states) with states unnormalized; the squared norm is
    the survival probability of the jump-free record.
    """
    eng = _make_engine(psi0, basis, params, t_span, dt_max, n_points)
    plan = eng.plan
    out = np.empty((plan.snap_times.size, basis.dim), dtype=complex)
    x = eng.psi0.copy()
    ptr = 0
    while ptr < plan.snap_after.size and plan.snap_after[ptr] == -1:
        out[ptr] = x
        ptr += 1
    cache_key = None
    mats = None
    for j in range(plan.n_steps):
        key = (plan.g1_stages[j, 0], plan.g1_stages[j, 1], plan.g1_stages[j, 2],
               plan.g2_stages[j, 0], plan.g2_stages[j, 1], plan.g2_stages[j, 2])
        if key != cache_key:
            mats = eng.gen.stage_matrices(plan.g1_stages[j], plan.g2_stages[j])
            cache_key = key
        x = rk4_step(x, plan.h[j], *mats)
        while ptr < plan.snap_after.size and plan.snap_after[ptr] == j:
            out[ptr] = x
            ptr += 1
    return plan.snap_times.copy(), out


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density matrix over the truncated basis."""

    matrix: np.ndarray

    def validate(self, atol: float = 1e-8):
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=1e-10):
            raise ValueError("density matrix is not hermitian")
        tr = np.trace(m).real
        if not -1e-8 <= tr <= 1.0 + 1e-8:
            raise ValueError(f"density matrix trace {tr} outside [0, 1]")
        if np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min() < -atol:
            raise ValueError("density matrix has a negative eigenvalue")
        return self

    @classmethod
    def from_state(cls, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()))


@dataclass(frozen=True, eq=False)
class LindbladResult:
    times: np.ndarray
    matrices: np.ndarray  # (n_snap, dim, dim)

    def trace(self) -> np.ndarray:
        return np.einsum("tii->t", self.matrices).real

    def basis_populations(self) -> np.ndarray:
        return np.einsum("tii->ti", self.matrices).real

    def manifold_populations(self, manifold: ManifoldBasis) -> np.ndarray:
        m = manifold.matrix
        return np.einsum("ki,tij,kj->tk", m.conj(), self.matrices, m).real


def lindblad_evolve(rho0, basis: Basis, params: SystemParams, t_span,
                    dt_max: float | None = None, n_points: int = 1000) -> LindbladResult:
    """Master-equation oracle: drho/dt = A rho + rho A^dag + sum C rho C^dag.

    A = -i H' reuses the trajectory generator, so both unravelings share
    one stepper and one step plan.
    """
    if isinstance(rho0, DensityMatrix):
        rho0 = rho0.matrix
    rho = np.array(rho0, dtype=complex)
    if rho.shape != (basis.dim, basis.dim):
        raise ValueError(f"rho0 must have shape ({basis.dim}, {basis.dim})")
    DensityMatrix(rho).validate()
    plan = build_step_plan(params, t_span, dt_max, n_points)
    gen = Generator(basis, params, decay_diag=decay_rates_diag(basis, params))
    cs = [ch.operator.to_dense() for ch in collapse_operators(basis, params)
          if ch.rate > 0.0]
    cds = [c.conj().T for c in cs]

    def rhs(r, a):
        out = a @ r
        out += out.conj().T
        for c, cd in zip(cs, cds):
            out += c @ r @ cd
        return out

    out = np.empty((plan.snap_times.size, basis.dim, basis.dim), dtype=complex)
    ptr = 0
    while ptr < plan.snap_after.size and plan.snap_after[ptr] == -1:
        out[ptr] = rho
        ptr += 1
    cache_key = None
    mats = None
    for j in range(plan.n_steps):
        key = (plan.g1_stages[j, 0], plan.g1_stages[j, 1], plan.g1_stages[j, 2],
               plan.g2_stages[j, 0], plan.g2_stages[j, 1], plan.g2_stages[j, 2])
        if key != cache_key:
            mats = gen.stage_matrices(plan.g1_stages[j], plan.g2_stages[j])
            cache_key = key
        a0, a1, a2 = mats
        h = plan.h[j]
        k1 = rhs(rho, a0)
        k2 = rhs(rho + (0.5 * h) * k1, a1)
        k3 = rhs(rho + (0.5 * h) * k2, a1)
        k4 = rhs(rho + h * k3, a2)
        rho = rho + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        while ptr < plan.snap_after.size and plan.snap_after[ptr] == j:
            out[ptr] = rho
            ptr += 1
    return LindbladResult(plan.snap_times.copy(), out)
