"""Experiment orchestration: schedules from config, engines, CSV output.

Engines
  coherent  lossless Schrodinger evolution (requires gamma = kappa = 0)
  nojump    deterministic evolution under the non-hermitian H'; the
            unnormalized manifold populations it records equal the
            master-equation (and hence ensemble-averaged) ones exactly,
            because every jump leaves the two-excitation manifold
  mcwf      quantum-trajectory ensemble (traj.n trajectories)
  lindblad  dense master-equation oracle
  auto      coherent when lossless, otherwise mcwf

Time-series CSV column 'norm': the state norm for coherent, the no-jump
survival amplitude for nojump, the square root of the summed averaged
populations for mcwf, and sqrt(trace rho) for lindblad.

Summary CSV columns F..seed are fixed; F_post (overlap of the post-selected
polarization state with the ideal pair state) and S_raw (= p_coinc * S_fixed,
the CHSH value without renormalizing away discarded events) are appended
extras.
"""

from __future__ import annotations

import dataclasses
import math
import os

import numpy as np

from . import analysis, coherent, dissipative, pulses
from .config import ConfigError, ExperimentConfig
from .statespace import SystemParams, build_basis, manifold_basis

TIMESERIES_COLUMNS = ("t", "P_I", "P_B", "P_D", "P_E+", "P_E-", "norm")
SUMMARY_COLUMNS = ("F", "t*", "S_fixed", "S_optimal", "p_coinc",
                   "n_traj", "seed", "F_post", "S_raw")

_PARAM_FIELDS = {
    "g": "g",
    "delta_plus": "delta_plus",
    "delta_minus": "delta_minus",
    "gamma": "gamma",
    "kappa": "kappa",
    "eta": "eta",
    "pulse.g_peak": "pulse_g_peak",
    "pulse.tau": "pulse_tau",
    "pulse.delay": "pulse_delay",
    "pulse.pad": "pulse_pad",
}


def format_value(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def build_schedules(cfg: ExperimentConfig):
    """Pulse schedules plus the default end time for the configured scheme."""
    g_peak = cfg.pulse_g_peak if cfg.pulse_g_peak is not None else cfg.g
    if cfg.scheme == "ro":
        shape = cfg.pulse_shape or "square"
        if cfg.pulse_tau is not None:
            w1 = w2 = cfg.pulse_tau
            s1 = pulses.calibrate_pi(
                pulses.PulseSchedule(shape, cfg.g, 0.0, w1), pulses.CAVITY1_RABI_FACTOR)
            s2 = pulses.calibrate_pi(
                pulses.PulseSchedule(shape, cfg.g, 0.0, w2), pulses.CAVITY2_RABI_FACTOR)
            gp1, gp2 = s1.g_peak, s2.g_peak
        else:
            w1 = pulses.width_for_pi(g_peak, shape, pulses.CAVITY1_RABI_FACTOR)
            w2 = pulses.width_for_pi(g_peak, shape, pulses.CAVITY2_RABI_FACTOR)
            gp1 = gp2 = g_peak
        if shape == "square":
            c1 = w1
            c2 = 2.0 * w1 + w2
            t_end = c2 + w2 + 0.5 * (w1 + w2)
        else:
            pad = cfg.pulse_pad
            c1 = pad * w1
            c2 = c1 + pad * (w1 + w2)
            t_end = c2 + 4.5 * w2
        s1 = pulses.PulseSchedule(shape, gp1, c1, w1)
        s2 = pulses.PulseSchedule(shape, gp2, c2, w2)
    else:
        tau = cfg.pulse_tau if cfg.pulse_tau is not None else 20.0 / cfg.g
        delay = cfg.pulse_delay if cfg.pulse_delay is not None else tau
        center2 = cfg.pulse_center if cfg.pulse_center is not None else 4.0 * tau
        s1, s2 = pulses.stirap_schedule(g_peak, tau, delay, center2)
        t_end = center2 + max(delay, 0.0) + 4.5 * tau
    if cfg.t_end is not None:
        t_end = cfg.t_end
    return s1, s2, t_end


def build_params(cfg: ExperimentConfig) -> tuple[SystemParams, float]:
    s1, s2, t_end = build_schedules(cfg)
    params = SystemParams(
        g=cfg.g, schedule1=s1, schedule2=s2,
        delta_plus=cfg.delta_plus, delta_minus=cfg.delta_minus,
        gamma=cfg.gamma, kappa=cfg.kappa, eta=cfg.eta,
    )
    return params, t_end


def resolve_engine(cfg: ExperimentConfig) -> str:
    if cfg.engine != "auto":
        return cfg.engine
    return "coherent" if cfg.gamma == 0.0 and cfg.kappa == 0.0 else "mcwf"


@dataclasses.dataclass(frozen=True, eq=False)
class SimulationOutput:
    engine: str
    params: SystemParams
    t_end: float
    times: np.ndarray
    manifold_populations: np.ndarray
    norm: np.ndarray
    postselection_source: object  # state vector, density matrix, or ensemble


def simulate(cfg: ExperimentConfig) -> SimulationOutput:
    engine = resolve_engine(cfg)
    params, t_end = build_params(cfg)
    basis = build_basis(cfg.n_max)
    mb = manifold_basis(basis)
    psi0 = basis.unit_vector("c", (1, 1, 0, 0))
    span = (0.0, t_end)

    if engine == "coherent":
        if cfg.gamma != 0.0 or cfg.kappa != 0.0:
            raise ConfigError("engine coherent requires gamma = 0 and kappa = 0")
        traj = coherent.evolve(psi0, basis, params, span, cfg.dt_max, cfg.t_points)
        return SimulationOutput(engine, params, t_end, traj.times,
                                traj.manifold_populations(mb), traj.norms(),
                                traj.final_state)
    if engine == "nojump":
        times, states = dissipative.no_jump_evolve(
            psi0, basis, params, span, cfg.dt_max, cfg.t_points)
        pops = np.abs(states @ mb.matrix.conj().T) ** 2
        return SimulationOutput(engine, params, t_end, times, pops,
                                np.linalg.norm(states, axis=1), states[-1])
    if engine == "mcwf":
        ens = dissipative.run_ensemble(
            psi0, basis, params, span, cfg.n_traj, cfg.seed,
            cfg.dt_max, cfg.t_points, cfg.workers)
        norm = np.sqrt(ens.avg_basis_populations.sum(axis=1))
        return SimulationOutput(engine, params, t_end, ens.times,
                                ens.avg_manifold_populations, norm, ens)
    if engine == "lindblad":
        rho0 = dissipative.DensityMatrix.from_state(psi0)
        res = dissipative.lindblad_evolve(rho0, basis, params, span,
                                          cfg.dt_max, cfg.t_points)
        return SimulationOutput(engine, params, t_end, res.times,
                                res.manifold_populations(mb),
                                np.sqrt(np.maximum(res.trace(), 0.0)),
                                res.matrices[-1])
    raise ConfigError(f"unknown engine {engine!r}")


def _polarization(sim: SimulationOutput, cfg: ExperimentConfig):
    """Post-selected polarization state, or None when t_end is inside a pulse."""
    p = sim.params
    if (p.schedule1.value(sim.t_end) >= 1e-6 * cfg.g
            or p.schedule2.value(sim.t_end) >= 1e-6 * cfg.g):
        return None
    basis = build_basis(cfg.n_max)
    source = sim.postselection_source
    if isinstance(source, np.ndarray) and source.ndim == 2:
        idx = list(analysis.coincidence_indices(basis))
        acc = source[np.ix_(idx, idx)]
        weight = np.trace(acc).real
        if weight < 1e-12:
            raise ValueError("no coincidence support")
        return analysis.PolarizationState(acc / weight, float(cfg.eta ** 2 * weight))
    return analysis.postselect_polarization(source, basis, cfg.eta)


def summarize(cfg: ExperimentConfig, sim: SimulationOutput) -> dict:
    f, t_star = analysis.fidelity(sim.times, sim.manifold_populations)
    row = {
        "F": f, "t*": t_star,
        "S_fixed": math.nan, "S_optimal": math.nan, "p_coinc": math.nan,
        "n_traj": cfg.n_traj, "seed": cfg.seed,
        "F_post": math.nan, "S_raw": math.nan,
    }
    try:
        pol = _polarization(sim, cfg)
    except ValueError:
        pol = None
    if pol is not None:
        res = analysis.chsh(pol)
        psi = analysis.bell_psi_plus()
        row.update({
            "S_fixed": res.s_fixed,
            "S_optimal": res.s_optimal,
            "p_coinc": pol.p_coinc,
            "F_post": float(np.real(psi.conj() @ pol.rho @ psi)),
            "S_raw": pol.p_coinc * res.s_fixed,
        })
    return row


def run_experiment(cfg: ExperimentConfig, out_dir: str, svg: bool = False) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    sim = simulate(cfg)
    summary = summarize(cfg, sim)

    ts_path = os.path.join(out_dir, "timeseries.csv")
    rows = np.column_stack([sim.times, sim.manifold_populations, sim.norm])
    _write_csv(ts_path, TIMESERIES_COLUMNS, rows)

    sm_path = os.path.join(out_dir, "summary.csv")
    _write_csv(sm_path, SUMMARY_COLUMNS, [[summary[c] for c in SUMMARY_COLUMNS]])

    paths = {"timeseries": ts_path, "summary": sm_path}
    if svg:
        paths["svg"] = _plot_timeseries(ts_path, sim, out_dir)
    return {"summary": summary, "paths": paths}


def _apply_param(cfg: ExperimentConfig, name: str, value: float) -> ExperimentConfig:
    if name in _PARAM_FIELDS:
        return dataclasses.replace(cfg, **{_PARAM_FIELDS[name]: value})
    avg = 0.5 * (cfg.delta_plus + cfg.delta_minus)
    diff = 0.5 * (cfg.delta_plus - cfg.delta_minus)
    if name == "delta_avg":
        avg = value
    elif name == "delta_diff":
        diff = value
    else:
        raise ConfigError(f"unknown sweep parameter {name!r}")
    return dataclasses.replace(cfg, delta_plus=avg + diff, delta_minus=avg - diff)


def run_sweep(cfg: ExperimentConfig, out_dir: str, svg: bool = False) -> dict:
    if cfg.sweep is None or not cfg.sweep.axes:
        raise ConfigError("sweep requires sweep.param1/min1/max1/steps1")
    os.makedirs(out_dir, exist_ok=True)
    axes = cfg.sweep.axes
    grids = [np.linspace(a.lo, a.hi, a.steps) for a in axes]
    header = [a.param for a in axes] + ["F", "S_fixed", "S_optimal", "p_coinc",
                                        "S_raw", "F_post"]
    if len(axes) == 1:
        points = [(v,) for v in grids[0]]
    else:
        points = [(v1, v2) for v1 in grids[0] for v2 in grids[1]]  # row-major

    def run_point(values):
        sub = cfg
        for axis, v in zip(axes, values):
            sub = _apply_param(sub, axis.param, float(v))
        summary = summarize(sub, simulate(sub))
        return list(values) + [summary["F"], summary["S_fixed"],
                               summary["S_optimal"], summary["p_coinc"],
                               summary["S_raw"], summary["F_post"]]

    if cfg.workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(run_point, points))
    else:
        rows = [run_point(values) for values in points]
    sw_path = os.path.join(out_dir, "sweep.csv")
    _write_csv(sw_path, header, rows)
    paths = {"sweep": sw_path}
    if svg:
        paths["svg"] = _plot_sweep(axes, grids, rows, out_dir)
    return {"paths": paths, "rows": len(rows)}


def _plot_timeseries(ts_path: str, sim: SimulationOutput, out_dir: str) -> str:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    labels = ("$P_I$", "$P_B$", "$P_D$", "$P_{E^+}$", "$P_{E^-}$")
    for k, lab in enumerate(labels):
        ax.plot(sim.times, sim.manifold_populations[:, k], label=lab)
    ax.set_xlabel("t g")
    ax.set_ylabel("population")
    ax.legend(loc="best", fontsize=8)
    path = os.path.join(out_dir, "timeseries.svg")
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path


def _plot_sweep(axes, grids, rows, out_dir: str) -> str:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    f_col = len(axes)
    if len(axes) == 1:
        ax.plot(grids[0], [r[f_col] for r in rows], marker="o")
        ax.set_xlabel(axes[0].param)
        ax.set_ylabel("F")
    else:
        f = np.array([r[f_col] for r in rows]).reshape(len(grids[0]), len(grids[1]))
        cs = ax.contourf(grids[1], grids[0], f, levels=11)
        fig.colorbar(cs, ax=ax, label="F")
        ax.set_xlabel(axes[1].param)
        ax.set_ylabel(axes[0].param)
    path = os.path.join(out_dir, "sweep.svg")
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path


# ---------------------------------------------------------------------------
# fast analytic self-test used by the `check` subcommand


def self_check() -> list[tuple[str, bool, str]]:
    results = []

    def add(name, ok, detail=""):
        results.append((name, bool(ok), detail))

    basis = build_basis(2)
    mb = manifold_basis(basis)

    dims = (len(build_basis(0)), len(build_basis(1)), basis.dim)
    add("basis dimensions 1/7/25", dims == (1, 7, 25), f"got {dims}")

    sched = pulses.PulseSchedule("gaussian", 1.0, 5.0, 1.0)
    params = SystemParams(g=1.0, schedule1=sched, schedule2=sched,
                          delta_plus=0.3, delta_minus=-0.2)
    from .statespace import hamiltonian
    h = hamiltonian(basis, params, 4.7).to_dense()
    herm = np.abs(h - h.conj().T).max()
    exc = basis.excitations()
    conserving = all(exc[r] == exc[c] for r, c in zip(*np.nonzero(h)))
    add("hamiltonian hermitian", herm < 1e-12, f"max dev {herm:.2e}")
    add("hamiltonian conserves excitation", conserving)

    gram = mb.matrix @ mb.matrix.conj().T
    add("manifold orthonormal", np.abs(gram - np.eye(5)).max() < 1e-12)
    g1 = params.schedule1.value(4.7)
    hb = mb.matrix.conj() @ h @ mb.matrix.T
    add("bright-state coupling sqrt(2) g1",
        abs(hb[1, 0] - math.sqrt(2.0) * g1) < 1e-12, f"got {hb[1, 0]:.6f}")

    flat = pulses.PulseSchedule("square", 0.2, 50.0, 50.0)
    off = pulses.PulseSchedule("square", 0.0, 50.0, 50.0)
    p2 = SystemParams(g=0.2, schedule1=flat, schedule2=off, delta_plus=0.4,
                      delta_minus=0.4)
    omega = math.sqrt(8 * 0.2 ** 2 + 0.4 ** 2)
    span = (0.0, 4 * math.pi / omega)
    traj = coherent.evolve(mb.initial, basis, p2, span, n_points=200)
    c_b, _ = coherent.rabi_oracle(0.2, 0.4, traj.times)
    err = np.abs(traj.manifold_populations(mb)[:, 1] - np.abs(c_b) ** 2).max()
    add("rabi closed form", err < 1e-8, f"max err {err:.2e}")

    cal = pulses.calibrate_pi(pulses.PulseSchedule("gaussian", 1.0, 0.0, 0.7),
                              pulses.CAVITY1_RABI_FACTOR)
    area = pulses.pulse_area(cal, pulses.CAVITY1_RABI_FACTOR)
    add("pi-pulse calibration", abs(area - math.pi) < 1e-12, f"area {area:.12f}")

    psi = analysis.bell_psi_plus()
    s_pair = analysis.chsh_fixed(np.outer(psi, psi.conj()))
    s_mix = analysis.chsh_fixed(analysis.anticorrelated_mixture())
    add("CHSH pair state 2*sqrt(2)", abs(s_pair - 2 * math.sqrt(2)) < 1e-10,
        f"got {s_pair:.9f}")
    add("CHSH decohered mixture sqrt(2)", abs(s_mix - math.sqrt(2)) < 1e-10,
        f"got {s_mix:.9f}")
    s_opt = analysis.chsh_optimal(np.outer(psi, psi.conj()))
    s_num = analysis.chsh_numeric(np.outer(psi, psi.conj()), n_starts=6)
    add("CHSH closed form vs numeric", abs(s_opt - s_num) < 1e-6,
        f"{s_opt:.8f} vs {s_num:.8f}")

    ref = dissipative.trajectory_seed(0, 0)
    add("seed splitting reference value", ref == 0xE220A8397B1DCDAF, hex(ref))

    p3 = SystemParams(g=1.0, schedule1=flat, schedule2=off)
    tr = dissipative.run_trajectory(mb.initial, basis, p3, (0.0, 3.0), seed=42,
                                    n_points=50)
    ct = coherent.evolve(mb.initial, basis, p3, (0.0, 3.0), n_points=50)
    dev = np.abs(tr.basis_populations - ct.basis_populations()).max()
    add("lossless trajectory matches coherent", dev < 1e-8 and not tr.jumps,
        f"max dev {dev:.2e}")

    kappa = 1.0
    pk = SystemParams(g=1.0, schedule1=off, schedule2=off, kappa=kappa)
    one = basis.unit_vector("c", (1, 0, 0, 0))
    ens = dissipative.run_ensemble(one, basis, pk, (0.0, 1.0), 1000, 2024,
                                   n_points=5)
    frac = np.mean(ens.n_jumps > 0)
    p_expect = 1.0 - math.exp(-kappa * 1.0)
    band = 4.0 * math.sqrt(p_expect * (1 - p_expect) / 1000)
    add("exponential jump statistics", abs(frac - p_expect) <= band,
        f"{frac:.3f} vs {p_expect:.3f} (band {band:.3f})")

    rho0 = dissipative.DensityMatrix.from_state(mb.initial)
    pl = SystemParams(g=1.0, schedule1=flat, schedule2=off, gamma=0.1, kappa=0.05)
    lr = dissipative.lindblad_evolve(rho0, basis, pl, (0.0, 3.0), n_points=20)
    drift = np.abs(lr.trace() - 1.0).max()
    add("lindblad trace conservation", drift < 1e-8, f"max drift {drift:.2e}")

    return results
