"""Truncated Hilbert space for a V-type atom coupled to two two-mode cavities.

The atom has ground level ``c`` and two excited levels ``a`` and ``b``,
addressed by sigma+ and sigma- polarized light respectively.  Each cavity
carries one sigma+ and one sigma- mode, giving four modes "1+", "1-",
"2+", "2-".  States are labelled by the atomic level and the four photon
occupations (n1+, n1-, n2+, n2-).

The interaction conserves the total excitation number

    N = n1+ + n1- + n2+ + n2- + (1 if atom is excited else 0)

so the basis is truncated at a caller-chosen N_max (default 2, which is
where the photon-pair dynamics lives).  Basis order is normative for any
serialized output: states sorted by atom (c < a < b), then by occupation
tuple, lexicographically ascending.  The vacuum |c; 0,0,0,0> comes first.

In the frame rotating at the common cavity frequency the Hamiltonian is

    H(t) = -dplus |a><a| - dminus |b><b|
           + sum_i g_i(t) (a_i+^dag S+ + a_i+ S+^dag + a_i-^dag S- + a_i- S-^dag)

with S+ = |c><a|, S- = |c><b| and dplus/dminus the cavity-atom detunings
of the two branches.

One modeling restriction is applied to the cavity-1 coupling: the atom
exchanges excitation with cavity 1 only while cavity 2 is empty.  Once a
photon has been deposited in cavity 2 the atom does not re-absorb the photon
remaining in cavity 1, so the two-excitation dynamics closes on the five
states reachable from the doubly loaded cavity 1.  Without this gate the
adiabatic transfer would continue past the one-photon-per-cavity states
and pile both photons into cavity 2.  Singly excited sectors (at most one
photon total) are unaffected because the gate only bites when a cavity-2
photon coexists with a cavity-1 exchange.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .pulses import PulseSchedule

ATOMS = ("c", "a", "b")
MODES = ("1+", "1-", "2+", "2-")


@dataclass(frozen=True)
class BasisState:
    """Atomic level plus photon occupations of the four cavity modes."""

    atom: str
    occupations: tuple[int, int, int, int]

    def __post_init__(self):
        if self.atom not in ATOMS:
            raise ValueError(f"unknown atomic level {self.atom!r}")
        if len(self.occupations) != 4 or any(n < 0 for n in self.occupations):
            raise ValueError("occupations must be four non-negative integers")

    @property
    def excitation(self) -> int:
        return sum(self.occupations) + (1 if self.atom != "c" else 0)


class Basis:
    """Ordered truncated basis; build with :func:`build_basis`."""

    def __init__(self, n_max: int, states: tuple[BasisState, ...]):
        self.n_max = n_max
        self.states = states
        self.dim = len(states)
        self._index = {s: i for i, s in enumerate(states)}

    def index_of(self, atom: str, occupations) -> int:
        state = BasisState(atom, tuple(occupations))
        try:
            return self._index[state]
        except KeyError:
            raise KeyError(f"state {state} exceeds the N <= {self.n_max} truncation") from None

    def unit_vector(self, atom: str, occupations) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index_of(atom, occupations)] = 1.0
        return v

    @property
    def vacuum_index(self) -> int:
        return self.index_of("c", (0, 0, 0, 0))

    def excitations(self) -> np.ndarray:
        return np.array([s.excitation for s in self.states], dtype=int)

    def __len__(self) -> int:
        return self.dim

    def __repr__(self) -> str:
        return f"Basis(n_max={self.n_max}, dim={self.dim})"


def build_basis(n_max: int = 2) -> Basis:
    """Enumerate all states with total excitation <= n_max in normative order."""
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    states = []
    for atom in ATOMS:
        for occ in itertools.product(range(n_max + 1), repeat=4):
            s = BasisState(atom, occ)
            if s.excitation <= n_max:
                states.append(s)
    return Basis(n_max, tuple(states))


@dataclass(frozen=True)
class SparseOperator:
    """Operator as explicit (row, col, value) triplets on a basis of size dim."""

    dim: int
    entries: tuple[tuple[int, int, complex], ...]

    def __post_init__(self):
        seen = set()
        for r, c, _ in self.entries:
            if not (0 <= r < self.dim and 0 <= c < self.dim):
                raise ValueError(f"entry ({r},{c}) outside dimension {self.dim}")
            if (r, c) in seen:
                raise ValueError(f"duplicate entry at ({r},{c})")
            seen.add((r, c))

    @classmethod
    def from_dense(cls, matrix: np.ndarray, tol: float = 0.0) -> "SparseOperator":
        matrix = np.asarray(matrix)
        rows, cols = np.nonzero(np.abs(matrix) > tol)
        entries = tuple((int(r), int(c), complex(matrix[r, c])) for r, c in zip(rows, cols))
        return cls(matrix.shape[0], entries)

    def to_dense(self) -> np.ndarray:
        m = np.zeros((self.dim, self.dim), dtype=complex)
        for r, c, v in self.entries:
            m[r, c] = v
        return m

    def dagger(self) -> "SparseOperator":
        return SparseOperator(self.dim, tuple((c, r, v.conjugate()) for r, c, v in self.entries))


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of one run.

    g is the reference vacuum Rabi coupling (the rate unit of the problem);
    the schedules carry the actual peak couplings.  gamma is the atomic
    spontaneous-emission rate out of either excited level, kappa the decay
    rate of every cavity mode, eta the detector efficiency.
    """

    g: float
    schedule1: PulseSchedule
    schedule2: PulseSchedule
    delta_plus: float = 0.0
    delta_minus: float = 0.0
    gamma: float = 0.0
    kappa: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        if self.g <= 0.0:
            raise ValueError("g must be positive")
        if self.gamma < 0.0 or self.kappa < 0.0:
            raise ValueError("decay rates must be non-negative")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")


def mode_annihilator(basis: Basis, mode: str) -> SparseOperator:
    """Annihilation operator of one cavity mode, <n-1|a|n> = sqrt(n)."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    k = MODES.index(mode)
    entries = []
    for col, s in enumerate(basis.states):
        n = s.occupations[k]
        if n == 0:
            continue
        occ = list(s.occupations)
        occ[k] = n - 1
        row = basis.index_of(s.atom, occ)
        entries.append((row, col, complex(np.sqrt(n))))
    return SparseOperator(basis.dim, tuple(entries))


def atomic_lowering(basis: Basis, branch: str) -> SparseOperator:
    """S+ = |c><a| (branch "+") or S- = |c><b| (branch "-")."""
    if branch not in ("+", "-"):
        raise ValueError("branch must be '+' or '-'")
    upper = "a" if branch == "+" else "b"
    entries = []
    for col, s in enumerate(basis.states):
        if s.atom != upper:
            continue
        row = basis.index_of("c", s.occupations)
        entries.append((row, col, 1.0 + 0.0j))
    return SparseOperator(basis.dim, tuple(entries))


@dataclass(frozen=True, eq=False)
class Operators:
    """Dense operator bundle cached per basis (internal fast path)."""

    annihilators: dict
    lower_plus: np.ndarray
    lower_minus: np.ndarray
    proj_a: np.ndarray
    proj_b: np.ndarray
    number_diag: np.ndarray
    mode_number_diag: dict
    coupling1: np.ndarray
    coupling2: np.ndarray
    excitations: np.ndarray


@lru_cache(maxsize=None)
def operator_set(basis: Basis) -> Operators:
    ann = {m: mode_annihilator(basis, m).to_dense() for m in MODES}
    sp = atomic_lowering(basis, "+").to_dense()
    sm = atomic_lowering(basis, "-").to_dense()
    proj_a = np.diag([1.0 if s.atom == "a" else 0.0 for s in basis.states]).astype(complex)
    proj_b = np.diag([1.0 if s.atom == "b" else 0.0 for s in basis.states]).astype(complex)
    mode_n = {m: np.array([s.occupations[i] for s in basis.states], dtype=float)
              for i, m in enumerate(MODES)}
    number = sum(mode_n.values())

    cav2_empty = np.diag([1.0 if s.occupations[2] + s.occupations[3] == 0 else 0.0
                          for s in basis.states]).astype(complex)

    def coupling(cavity: str) -> np.ndarray:
        # Form a_dag S first: its intermediate states stay inside the
        # excitation truncation, unlike a S_dag whose intermediate would
        # leave it and lose matrix elements.
        ap, am = ann[cavity + "+"], ann[cavity + "-"]
        x = ap.conj().T @ sp + am.conj().T @ sm
        if cavity == "1":
            # Cavity-1 exchange happens only while cavity 2 is empty (see
            # module docstring); gating the emission output also gates the
            # conjugate absorption input, keeping the operator hermitian.
            x = cav2_empty @ x
        return x + x.conj().T

    return Operators(
        annihilators=ann,
        lower_plus=sp,
        lower_minus=sm,
        proj_a=proj_a,
        proj_b=proj_b,
        number_diag=number,
        mode_number_diag=mode_n,
        coupling1=coupling("1"),
        coupling2=coupling("2"),
        excitations=basis.excitations(),
    )


def hamiltonian(basis: Basis, params: SystemParams, t: float) -> SparseOperator:
    """Rotating-frame Hamiltonian at time t."""
    ops = operator_set(basis)
    g1 = params.schedule1.value(t)
    g2 = params.schedule2.value(t)
    h = (-params.delta_plus) * ops.proj_a + (-params.delta_minus) * ops.proj_b
    h = h + g1 * ops.coupling1 + g2 * ops.coupling2
    return SparseOperator.from_dense(h)


@dataclass(frozen=True, eq=False)
class ManifoldBasis:
    """The five N = 2 states that carry the pair-generation dynamics.

    initial    |I>  = a1+^dag a1-^dag |vac>      two photons stored in cavity 1
    bright     |B>  = (S+^dag a1-^dag + S-^dag a1+^dag)|vac> / sqrt(2)
    dark       |D>  = (S+^dag a1-^dag - S-^dag a1+^dag)|vac> / sqrt(2)
    bell_plus  |E+> = (a2+^dag a1-^dag + a2-^dag a1+^dag)|vac> / sqrt(2)
    bell_minus |E-> = (a2+^dag a1-^dag - a2-^dag a1+^dag)|vac> / sqrt(2)

    |E+> is the target: one photon in each cavity with anticorrelated
    circular polarizations, a maximally entangled pair.
    """

    initial: np.ndarray
    bright: np.ndarray
    dark: np.ndarray
    bell_plus: np.ndarray
    bell_minus: np.ndarray

    names = ("I", "B", "D", "E+", "E-")

    @property
    def matrix(self) -> np.ndarray:
        """Rows are the five states in the order of ``names``."""
        return np.vstack([self.initial, self.bright, self.dark,
                          self.bell_plus, self.bell_minus])


def manifold_basis(basis: Basis) -> ManifoldBasis:
    if basis.n_max < 2:
        raise ValueError("manifold states need a basis with n_max >= 2")
    ops = operator_set(basis)
    vac = basis.unit_vector("c", (0, 0, 0, 0))
    a1p, a1m = ops.annihilators["1+"], ops.annihilators["1-"]
    a2p, a2m = ops.annihilators["2+"], ops.annihilators["2-"]
    sp, sm = ops.lower_plus, ops.lower_minus
    dag = lambda m: m.conj().T
    root2 = np.sqrt(2.0)
    initial = dag(a1p) @ dag(a1m) @ vac
    bright = (dag(sp) @ dag(a1m) + dag(sm) @ dag(a1p)) @ vac / root2
    dark = (dag(sp) @ dag(a1m) - dag(sm) @ dag(a1p)) @ vac / root2
    bell_plus = (dag(a2p) @ dag(a1m) + dag(a2m) @ dag(a1p)) @ vac / root2
    bell_minus = (dag(a2p) @ dag(a1m) - dag(a2m) @ dag(a1p)) @ vac / root2
    return ManifoldBasis(initial, bright, dark, bell_plus, bell_minus)
