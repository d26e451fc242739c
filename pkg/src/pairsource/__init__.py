"""Simulation of a cavity-QED source of polarization-entangled photon pairs.

A V-type three-level atom crosses two polarization-degenerate optical
cavities and deposits one photon in each, either through truncated vacuum
Rabi oscillations or through a counterintuitive STIRAP pulse sequence.
Dissipation (atomic spontaneous emission and cavity photon loss) is treated
with quantum trajectories against a dense master-equation oracle.
"""

from .analysis import (
    CHSHResult,
    PolarizationState,
    anticorrelated_mixture,
    bell_psi_plus,
    chsh,
    chsh_fixed,
    chsh_numeric,
    chsh_optimal,
    fidelity,
    postselect_polarization,
)
from .coherent import (
    CoherentTrajectory,
    adiabaticity_report,
    dark_state,
    default_dt_max,
    evolve,
    rabi_oracle,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    SweepAxis,
    SweepSpec,
    load_config,
    parse_config,
    validate_config,
)
from .dissipative import (
    DensityMatrix,
    EnsembleResult,
    TrajectoryResult,
    collapse_operators,
    effective_hamiltonian,
    lindblad_evolve,
    no_jump_evolve,
    run_ensemble,
    run_trajectory,
    trajectory_seed,
)
from .pulses import (
    PulseSchedule,
    calibrate_pi,
    mixing_angle,
    pulse_area,
    stirap_schedule,
    width_for_pi,
)
from .runner import run_experiment, run_sweep, self_check, simulate
from .statespace import (
    Basis,
    BasisState,
    ManifoldBasis,
    SystemParams,
    build_basis,
    hamiltonian,
    manifold_basis,
    operator_set,
)

__version__ = "0.1.0"

__all__ = [
    "Basis",
    "BasisState",
    "CHSHResult",
    "CoherentTrajectory",
    "ConfigError",
    "DensityMatrix",
    "EnsembleResult",
    "ExperimentConfig",
    "ManifoldBasis",
    "PolarizationState",
    "PulseSchedule",
    "SweepAxis",
    "SweepSpec",
    "SystemParams",
    "TrajectoryResult",
    "adiabaticity_report",
    "anticorrelated_mixture",
    "bell_psi_plus",
    "build_basis",
    "calibrate_pi",
    "chsh",
    "chsh_fixed",
    "chsh_numeric",
    "chsh_optimal",
    "collapse_operators",
    "dark_state",
    "default_dt_max",
    "effective_hamiltonian",
    "evolve",
    "fidelity",
    "hamiltonian",
    "lindblad_evolve",
    "load_config",
    "manifold_basis",
    "mixing_angle",
    "no_jump_evolve",
    "operator_set",
    "parse_config",
    "postselect_polarization",
    "pulse_area",
    "rabi_oracle",
    "run_ensemble",
    "run_experiment",
    "run_sweep",
    "run_trajectory",
    "self_check",
    "simulate",
    "stirap_schedule",
    "trajectory_seed",
    "validate_config",
    "width_for_pi",
]
