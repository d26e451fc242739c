"""Physics readouts: fidelity, coincidence post-selection, and CHSH.

The two-photon polarization space is spanned by the four one-photon-per-
cavity states, ordered (++, +-, -+, --) with the first symbol the cavity-1
circular polarization and the second the cavity-2 one.

CHSH convention: each photon passes a quarter-wave plate mapping sigma+-
to (|H> +- i|V>)/sqrt(2) and is then analyzed by a linear polarizer at
angle alpha, i.e. the observable cos(2a) sz + sin(2a) sx in the H/V basis.
With the default angles (0, 45, 22.5, 67.5 degrees) the ideal pair state
(|+-> + |-+>)/sqrt(2), which the plates turn into (|HH> + |VV>)/sqrt(2),
attains S = 2*sqrt(2); the fully dephased anticorrelated mixture in the
analyzer basis, (|HV><HV| + |VH><VH|)/2, gives S = sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dissipative import DensityMatrix, EnsembleResult
from .statespace import Basis, ManifoldBasis

POLARIZATION_BASIS = ("++", "+-", "-+", "--")

# occupations (n1+, n1-, n2+, n2-) of the coincidence states, atom in c
_COINCIDENCE_OCC = ((1, 0, 1, 0), (1, 0, 0, 1), (0, 1, 1, 0), (0, 1, 0, 1))

DEFAULT_ANGLES = (0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)

# quarter-wave plate: circular components -> linear (H, V) components
QWP = np.array([[1.0, 1.0], [1.0j, -1.0j]]) / math.sqrt(2.0)

_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_PAULI = (_SX, _SY, _SZ)


def coincidence_indices(basis: Basis) -> tuple[int, int, int, int]:
    """Basis indices of the four coincidence states, polarization order."""
    return tuple(basis.index_of("c", occ) for occ in _COINCIDENCE_OCC)


@dataclass(frozen=True, eq=False)
class PolarizationState:
    """Post-selected two-photon polarization state.

    rho is normalized (unit trace); p_coinc is the coincidence probability
    including the eta^2 detector factor.
    """

    rho: np.ndarray
    p_coinc: float

    def validate(self) -> "PolarizationState":
        _check_rho(self.rho)
        if not 0.0 <= self.p_coinc <= 1.0 + 1e-9:
            raise ValueError(f"p_coinc {self.p_coinc} outside [0, 1]")
        return self


def _check_rho(rho: np.ndarray):
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise ValueError("polarization density matrix must be 4x4")
    if not np.allclose(rho, rho.conj().T, atol=1e-8):
        raise ValueError("polarization density matrix is not hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-6:
        raise ValueError("polarization density matrix is not normalized")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-8:
        raise ValueError("polarization density matrix is not positive")


def _as_rho(state) -> np.ndarray:
    if isinstance(state, PolarizationState):
        return np.asarray(state.rho, dtype=complex)
    return np.asarray(state, dtype=complex)


def fidelity(times: np.ndarray, populations: np.ndarray) -> tuple[float, float]:
    """Max over the grid of the |E+> population and its (first) argmax time.

    populations may be the bare P_E+ column or the full (n, 5) manifold
    population array.
    """
    times = np.asarray(times, dtype=float)
    populations = np.asarray(populations, dtype=float)
    if times.size == 0 or populations.size == 0:
        raise ValueError("empty population record")
    p = populations[:, 3] if populations.ndim == 2 else populations
    if p.shape != times.shape:
        raise ValueError("times and populations have mismatched lengths")
    k = int(np.argmax(p))
    return float(p[k]), float(times[k])


def manifold_populations(state, manifold: ManifoldBasis) -> np.ndarray:
    """(P_I, P_B, P_D, P_E+, P_E-) of a state vector or density matrix."""
    m = manifold.matrix
    if isinstance(state, DensityMatrix):
        state = state.matrix
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return np.abs(m.conj() @ state) ** 2
    return np.einsum("ki,ij,kj->k", m.conj(), state, m).real


def postselect_polarization(source, basis: Basis, eta: float = 1.0) -> PolarizationState:
    """Coincidence post-selection into the polarization density matrix.

    source is either an EnsembleResult (zero-jump trajectories enter,
    weighted by their conditional norm squared) or a single conditional
    state vector whose norm encodes the no-jump survival weight.
    p_coinc = eta^2 * mean post-selected weight.
    """
    idx = list(coincidence_indices(basis))
    acc = np.zeros((4, 4), dtype=complex)
    if isinstance(source, EnsembleResult):
        keep = np.nonzero(source.n_jumps == 0)[0]
        if keep.size:
            amps = source.final_states[keep][:, idx]
            acc = np.einsum("n,ni,nj->ij", source.final_norm2[keep],
                            amps, amps.conj()) / keep.size
    else:
        psi = np.asarray(source, dtype=complex)
        if psi.ndim != 1 or psi.size != basis.dim:
            raise ValueError(f"expected a state vector of length {basis.dim}")
        v = psi[idx]
        acc = np.outer(v, v.conj())
    weight = np.trace(acc).real
    if weight < 1e-12:
        raise ValueError("no coincidence support")
    return PolarizationState(rho=acc / weight, p_coinc=float(eta ** 2 * weight))


def bell_psi_plus() -> np.ndarray:
    """(|+-> + |-+>)/sqrt(2) as a polarization-basis vector."""
    v = np.zeros(4, dtype=complex)
    v[1] = v[2] = 1.0 / math.sqrt(2.0)
    return v


def anticorrelated_mixture() -> np.ndarray:
    """(|HV><HV| + |VH><VH|)/2 in the analyzer basis, pulled back to circular.

    This is the fully decohered anticorrelated state a linear-basis
    coincidence analysis would see; it marks the S = sqrt(2) benchmark.
    """
    u2 = np.kron(QWP, QWP)
    rho_lin = np.diag([0.0, 0.5, 0.5, 0.0]).astype(complex)
    return u2.conj().T @ rho_lin @ u2


def _analyzer(angle: float) -> np.ndarray:
    return math.cos(2 * angle) * _SZ + math.sin(2 * angle) * _SX


def correlation(state, alpha: float, beta: float) -> float:
    """E(alpha, beta): polarization correlation behind the wave plates."""
    rho = _as_rho(state)
    u2 = np.kron(QWP, QWP)
    rho_lin = u2 @ rho @ u2.conj().T
    return float(np.trace(rho_lin @ np.kron(_analyzer(alpha), _analyzer(beta))).real)


def chsh_fixed(state, angles=DEFAULT_ANGLES) -> float:
    """CHSH S at fixed analyzer angles (alpha, alpha', beta, beta')."""
    rho = _as_rho(state)
    _check_rho(rho)
    a, ap, b, bp = angles
    s = (correlation(rho, a, b) - correlation(rho, a, bp)
         + correlation(rho, ap, b) + correlation(rho, ap, bp))
    return abs(s)


def correlation_matrix(state) -> np.ndarray:
    """3x3 matrix T_ij = Tr[rho sigma_i x sigma_j] in the circular basis."""
    rho = _as_rho(state)
    t = np.empty((3, 3))
    for i, si in enumerate(_PAULI):
        for j, sj in enumerate(_PAULI):
            t[i, j] = np.trace(rho @ np.kron(si, sj)).real
    return t


def chsh_optimal(state) -> float:
    """Largest CHSH value over all analyzer settings: 2 sqrt(m1 + m2).

    m1, m2 are the two largest eigenvalues of T^T T; invariant under local
    basis changes, so the wave-plate map drops out.
    """
    rho = _as_rho(state)
    _check_rho(rho)
    t = correlation_matrix(rho)
    eigs = np.sort(np.linalg.eigvalsh(t.T @ t))
    return 2.0 * math.sqrt(max(eigs[-1], 0.0) + max(eigs[-2], 0.0))


def chsh_numeric(state, n_starts: int = 12, seed: int = 7) -> float:
    """Direct maximization over Bloch settings; cross-check for chsh_optimal."""
    from scipy.optimize import minimize

    t = correlation_matrix(_as_rho(state))

    def unit(theta, phi):
        return np.array([math.sin(theta) * math.cos(phi),
                         math.sin(theta) * math.sin(phi),
                         math.cos(theta)])

    def neg_s(x):
        a, ap, b, bp = (unit(x[2 * k], x[2 * k + 1]) for k in range(4))
        return -(a @ t @ b - a @ t @ bp + ap @ t @ b + ap @ t @ bp)

    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_starts):
        x0 = rng.uniform(0.0, math.pi, size=8)
        res = minimize(neg_s, x0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
        best = max(best, -res.fun)
    return best


@dataclass(frozen=True)
class CHSHResult:
    s_fixed: float
    s_optimal: float
    angles: tuple[float, float, float, float]


def chsh(state, angles=DEFAULT_ANGLES) -> CHSHResult:
    return CHSHResult(
        s_fixed=chsh_fixed(state, angles),
        s_optimal=chsh_optimal(state),
        angles=tuple(float(a) for a in angles),
    )
