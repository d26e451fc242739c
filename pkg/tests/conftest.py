"""Shared fixtures: the truncated basis and the committed decay ensembles.

The three decay-profile ensembles (10^4 trajectories each) dominate the
suite runtime, so they are session scoped and shared between the fidelity
checks and the master-equation comparison in the acceptance module.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
import pytest

from pairsource import dissipative, runner
from pairsource.config import ExperimentConfig, load_config
from pairsource.statespace import (Basis, ManifoldBasis, SystemParams,
                                   build_basis, manifold_basis)

ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = ROOT / "configs"

# Verdict lines appended by the acceptance module; echoed after the run so
# they survive output capture.
ACCEPTANCE_LINES: list[str] = []


def config_path(name: str) -> Path:
    return CONFIG_DIR / f"{name}.cfg"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def basis() -> Basis:
    return build_basis(2)


@pytest.fixture(scope="session")
def manifold(basis) -> ManifoldBasis:
    return manifold_basis(basis)


@dataclasses.dataclass(frozen=True, eq=False)
class DecayRun:
    """A committed decay profile: trajectory ensemble plus Lindblad oracle."""

    name: str
    cfg: ExperimentConfig
    params: SystemParams
    t_end: float
    ensemble: dissipative.EnsembleResult
    lindblad_manifold: np.ndarray

    @property
    def fidelity(self) -> float:
        from pairsource.analysis import fidelity
        return fidelity(self.ensemble.times,
                        self.ensemble.avg_manifold_populations)[0]


def _decay_run(name: str, basis: Basis, manifold: ManifoldBasis) -> DecayRun:
    cfg = load_config(config_path(name))
    params, t_end = runner.build_params(cfg)
    psi0 = basis.unit_vector("c", (1, 1, 0, 0))
    ens = dissipative.run_ensemble(psi0, basis, params, (0.0, t_end),
                                   cfg.n_traj, cfg.seed, cfg.dt_max,
                                   cfg.t_points)
    rho0 = dissipative.DensityMatrix.from_state(psi0)
    lind = dissipative.lindblad_evolve(rho0, basis, params, (0.0, t_end),
                                       cfg.dt_max, cfg.t_points)
    return DecayRun(name, cfg, params, t_end, ens,
                    lind.manifold_populations(manifold))


@pytest.fixture(scope="session")
def ro_decay_run(basis, manifold) -> DecayRun:
    return _decay_run("ro_decay", basis, manifold)


@pytest.fixture(scope="session")
def stirap_atom_decay_run(basis, manifold) -> DecayRun:
    return _decay_run("stirap_atom_decay", basis, manifold)


@pytest.fixture(scope="session")
def stirap_cavity_decay_run(basis, manifold) -> DecayRun:
    return _decay_run("stirap_cavity_decay", basis, manifold)
