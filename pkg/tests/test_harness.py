"""Config parsing, schedule building, CSV contracts, and the CLI."""

import dataclasses
import filecmp
import math

import numpy as np
import pytest

from pairsource import cli, pulses, runner
from pairsource.config import (ConfigError, ExperimentConfig, load_config,
                               parse_config, validate_config)

from conftest import config_path


def read_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    rows = [[float(v) for v in line.split(",")] for line in lines[1:]]
    return header, np.array(rows)


# -- config parsing ---------------------------------------------------------


def test_parse_config_basics():
    text = """
    # a comment
    scheme = ro   # trailing comment
    gamma = 0.05
    traj.n = 250
    seed = 0xdeadbeef

    engine = mcwf
    """
    values = parse_config(text)
    assert values["scheme"] == "ro"
    assert values["gamma"] == 0.05
    assert values["traj.n"] == 250
    assert values["seed"] == 0xDEADBEEF


@pytest.mark.parametrize("text,fragment", [
    ("scheme = ro\nbogus = 1\n", "unknown key 'bogus'"),
    ("scheme = ro\nscheme = stirap\n", "duplicate key 'scheme'"),
    ("scheme = ro\ngamma = fast\n", "bad value 'fast'"),
    ("scheme = ro\ngamma =\n", "empty value"),
    ("scheme = ro\ngamma 0.1\n", "expected 'key = value'"),
    ("gamma = 0.1\n", "missing required key 'scheme'"),
    ("scheme = qubit\n", "scheme must be one of"),
    ("scheme = ro\nengine = magic\n", "engine must be one of"),
    ("scheme = ro\ngamma = -0.1\n", "gamma must be non-negative"),
    ("scheme = ro\neta = 1.2\n", "eta must lie in"),
    ("scheme = ro\nn_max = 1\n", "n_max must be >= 2"),
    ("scheme = ro\ntraj.n = 0\n", "traj.n must be >= 1"),
    ("scheme = ro\nseed = 18446744073709551616\n", "64-bit"),
    ("scheme = ro\nt.points = 1\n", "t.points must be >= 2"),
    ("scheme = ro\npulse.delay = 1\n", "pulse.delay applies only"),
    ("scheme = stirap\npulse.shape = square\n", "stirap requires gaussian"),
    ("scheme = ro\npulse.tau = 1\npulse.g_peak = 1\n", "mutually exclusive"),
    ("scheme = ro\nsweep.param1 = gamma\nsweep.min1 = 0\nsweep.max1 = 1\n",
     "missing sweep.steps1"),
    ("scheme = ro\nsweep.param2 = gamma\nsweep.min2 = 0\nsweep.max2 = 1\n"
     "sweep.steps2 = 3\n", "sweep.param2 given without sweep.param1"),
    ("scheme = ro\nsweep.param1 = t.end\nsweep.min1 = 0\nsweep.max1 = 1\n"
     "sweep.steps1 = 3\n", "not sweepable"),
    ("scheme = ro\nsweep.param1 = gamma\nsweep.min1 = 1\nsweep.max1 = 0\n"
     "sweep.steps1 = 3\n", "must not exceed"),
    ("scheme = ro\nsweep.param1 = gamma\nsweep.min1 = 0\nsweep.max1 = 1\n"
     "sweep.steps1 = 1\n", "steps1 must be >= 2"),
])
def test_config_rejection(text, fragment):
    with pytest.raises(ConfigError) as err:
        validate_config(text)
    assert fragment in str(err.value)


def test_config_defaults():
    cfg = validate_config("scheme = stirap\n")
    assert cfg.engine == "auto" and cfg.g == 1.0
    assert cfg.gamma == 0.0 and cfg.kappa == 0.0 and cfg.eta == 1.0
    assert cfg.n_max == 2 and cfg.t_points == 1000
    assert cfg.n_traj == 1 and cfg.seed == 0 and cfg.workers == 1
    assert cfg.pulse_shape is None and cfg.sweep is None


def test_config_error_reports_line_number():
    with pytest.raises(ConfigError, match="line 3"):
        validate_config("scheme = ro\ngamma = 0.1\nwhat = 7\n")


def test_sweep_axes_parsed():
    cfg = load_config(config_path("sweep_rates_ro"))
    assert cfg.sweep.shape == (21, 21)
    assert cfg.sweep.axes[0].param == "gamma"
    assert cfg.sweep.axes[1].param == "kappa"
    assert cfg.sweep.axes[0].lo == 0.0 and cfg.sweep.axes[0].hi == 0.1


# -- schedule building ------------------------------------------------------


def test_ro_square_geometry():
    cfg = validate_config("scheme = ro\ng = 1.0\n")
    s1, s2, t_end = runner.build_schedules(cfg)
    assert s1.shape == s2.shape == "square"
    w1 = pulses.width_for_pi(1.0, "square", pulses.CAVITY1_RABI_FACTOR)
    w2 = pulses.width_for_pi(1.0, "square", pulses.CAVITY2_RABI_FACTOR)
    assert s1.width == pytest.approx(w1) and s2.width == pytest.approx(w2)
    assert s1.center == pytest.approx(w1)          # pulse 1 starts at t = 0
    assert s2.center == pytest.approx(2 * w1 + w2)  # pulse 2 follows directly
    assert pulses.pulse_area(s1, pulses.CAVITY1_RABI_FACTOR) == pytest.approx(math.pi)
    assert pulses.pulse_area(s2, pulses.CAVITY2_RABI_FACTOR) == pytest.approx(math.pi)
    assert t_end > s2.center + s2.width


def test_ro_fixed_width_calibrates_peaks():
    cfg = validate_config("scheme = ro\npulse.tau = 0.9\n")
    s1, s2, _ = runner.build_schedules(cfg)
    assert s1.width == s2.width == 0.9
    assert pulses.pulse_area(s1, pulses.CAVITY1_RABI_FACTOR) == pytest.approx(math.pi)
    assert pulses.pulse_area(s2, pulses.CAVITY2_RABI_FACTOR) == pytest.approx(math.pi)
    assert s1.g_peak != s2.g_peak


def test_stirap_geometry_defaults():
    cfg = validate_config("scheme = stirap\ng = 0.5\n")
    s1, s2, t_end = runner.build_schedules(cfg)
    tau = 40.0  # 20 / g
    assert s1.width == s2.width == pytest.approx(tau)
    assert s2.center == pytest.approx(4 * tau)
    assert s1.center == pytest.approx(5 * tau)  # cavity 2 leads by one tau
    assert t_end == pytest.approx(4 * tau + tau + 4.5 * tau)
    assert s1.g_peak == s2.g_peak == 0.5


def test_t_end_override():
    cfg = validate_config("scheme = ro\nt.end = 9.5\n")
    _, _, t_end = runner.build_schedules(cfg)
    assert t_end == 9.5


def test_resolve_engine():
    assert runner.resolve_engine(validate_config("scheme = ro\n")) == "coherent"
    assert runner.resolve_engine(
        validate_config("scheme = ro\nkappa = 0.1\n")) == "mcwf"
    assert runner.resolve_engine(
        validate_config("scheme = ro\nengine = lindblad\n")) == "lindblad"
    with pytest.raises(ConfigError):
        runner.simulate(validate_config("scheme = ro\nengine = coherent\n"
                                        "gamma = 0.1\n"))


def test_format_value():
    assert runner.format_value(3) == "3"
    assert runner.format_value(np.int64(7)) == "7"
    assert runner.format_value(1.0) == "1"
    assert runner.format_value(1 / 3) == "0.333333333333"
    assert runner.format_value(float("nan")) == "nan"
    assert runner.format_value(2.5e-13) == "2.5e-13"


# -- experiment runner ------------------------------------------------------


def test_run_experiment_csv_contract(tmp_path):
    cfg = dataclasses.replace(load_config(config_path("ro_lossless")),
                              t_points=40)
    out = runner.run_experiment(cfg, str(tmp_path / "a"))
    header, rows = read_csv(out["paths"]["timeseries"])
    assert header == list(runner.TIMESERIES_COLUMNS)
    assert header[4] == "P_E+"
    assert rows.shape == (40, 7)
    assert rows[0, 0] == 0.0 and rows[0, 1] == 1.0  # starts in |I>
    assert np.abs(rows[:, 6] - 1.0).max() < 1e-9    # coherent norm column
    sheader, srows = read_csv(out["paths"]["summary"])
    assert sheader == list(runner.SUMMARY_COLUMNS)
    assert srows.shape == (1, 9)
    s = out["summary"]
    assert s["F"] == pytest.approx(1.0, abs=1e-6)
    assert s["S_fixed"] == pytest.approx(2 * math.sqrt(2), abs=1e-6)
    # F in the summary equals the maximum of the P_E+ column
    assert s["F"] == pytest.approx(rows[:, 4].max(), abs=1e-12)

    runner.run_experiment(cfg, str(tmp_path / "b"))
    assert filecmp.cmp(tmp_path / "a" / "timeseries.csv",
                       tmp_path / "b" / "timeseries.csv", shallow=False)
    assert filecmp.cmp(tmp_path / "a" / "summary.csv",
                       tmp_path / "b" / "summary.csv", shallow=False)


def test_timeseries_values_are_12_digit_stable(tmp_path):
    cfg = dataclasses.replace(load_config(config_path("ro_lossless")),
                              t_points=12)
    out = runner.run_experiment(cfg, str(tmp_path))
    with open(out["paths"]["timeseries"], "r", encoding="utf-8") as fh:
        body = fh.read().splitlines()[1:]
    for line in body:
        for field in line.split(","):
            assert field == f"{float(field):.12g}"


def test_summary_nan_when_run_ends_inside_pulse(tmp_path):
    cfg = dataclasses.replace(load_config(config_path("ro_lossless")),
                              t_end=1.0, t_points=20)
    out = runner.run_experiment(cfg, str(tmp_path))
    assert math.isnan(out["summary"]["S_fixed"])
    assert math.isnan(out["summary"]["p_coinc"])
    assert out["summary"]["F"] >= 0.0


def test_sweep_rows_and_row_major_order(tmp_path):
    text = ("scheme = ro\nengine = nojump\nkappa = 0.005\nt.points = 60\n"
            "sweep.param1 = gamma\nsweep.min1 = 0\nsweep.max1 = 0.06\n"
            "sweep.steps1 = 3\n"
            "sweep.param2 = eta\nsweep.min2 = 0.5\nsweep.max2 = 1\n"
            "sweep.steps2 = 2\n")
    cfg = validate_config(text)
    out = runner.run_sweep(cfg, str(tmp_path))
    header, rows = read_csv(out["paths"]["sweep"])
    assert header[:2] == ["gamma", "eta"]
    assert header[2:] == ["F", "S_fixed", "S_optimal", "p_coinc", "S_raw",
                          "F_post"]
    assert rows.shape == (6, 8)
    assert np.allclose(rows[:, 0], np.repeat([0.0, 0.03, 0.06], 2))
    assert np.allclose(rows[:, 1], np.tile([0.5, 1.0], 3))
    # fidelity decreases with gamma, is eta independent
    f = rows[:, 2].reshape(3, 2)
    assert np.all(np.diff(f[:, 0]) < 0)
    assert np.allclose(f[:, 0], f[:, 1], atol=1e-12)
    # p_coinc carries the eta^2 detector factor
    p = rows[:, 5].reshape(3, 2)
    assert np.allclose(p[:, 0], 0.25 * p[:, 1], atol=1e-12)


def test_sweep_deterministic_across_workers(tmp_path):
    text = ("scheme = ro\nengine = nojump\nkappa = 0.01\nt.points = 40\n"
            "sweep.param1 = gamma\nsweep.min1 = 0\nsweep.max1 = 0.05\n"
            "sweep.steps1 = 4\n")
    for w, d in ((1, "w1"), (3, "w3")):
        cfg = dataclasses.replace(validate_config(text), workers=w)
        runner.run_sweep(cfg, str(tmp_path / d))
    assert filecmp.cmp(tmp_path / "w1" / "sweep.csv",
                       tmp_path / "w3" / "sweep.csv", shallow=False)


def test_sweep_requires_axes():
    with pytest.raises(ConfigError):
        runner.run_sweep(validate_config("scheme = ro\n"), "unused")


def test_sweep_delta_parameters():
    cfg = validate_config("scheme = ro\n")
    sub = runner._apply_param(cfg, "delta_avg", 0.2)
    sub = runner._apply_param(sub, "delta_diff", 0.05)
    assert sub.delta_plus == pytest.approx(0.25)
    assert sub.delta_minus == pytest.approx(0.15)
    with pytest.raises(ConfigError):
        runner._apply_param(cfg, "volume", 1.0)


# -- command line -----------------------------------------------------------


def test_cli_run_prints_summary(tmp_path, capsys):
    rc = cli.main(["run", "--config", str(config_path("ro_lossless")),
                   "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert rc == 0
    assert any(line.startswith("F = ") for line in out.splitlines())
    assert "wrote timeseries:" in out and "wrote summary:" in out
    assert (tmp_path / "timeseries.csv").exists()


def test_cli_svg_outputs(tmp_path):
    cfg_text = "scheme = ro\nt.points = 30\n"
    cfg_file = tmp_path / "tiny.cfg"
    cfg_file.write_text(cfg_text)
    rc = cli.main(["run", "--config", str(cfg_file),
                   "--out", str(tmp_path / "o"), "--svg"])
    assert rc == 0
    assert (tmp_path / "o" / "timeseries.svg").exists()


def test_cli_overrides(tmp_path):
    cfg_file = tmp_path / "t.cfg"
    cfg_file.write_text("scheme = ro\nkappa = 0.02\nt.points = 25\n"
                        "traj.n = 3\nseed = 1\n")
    rc = cli.main(["run", "--config", str(cfg_file), "--out", str(tmp_path / "o"),
                   "--seed", "77", "--traj", "5", "--workers", "2"])
    assert rc == 0
    header, rows = read_csv(tmp_path / "o" / "summary.csv")
    assert rows[0, header.index("n_traj")] == 5
    assert rows[0, header.index("seed")] == 77


def test_cli_error_codes(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "missing.cfg"),
                     "--out", str(tmp_path)]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("scheme = ro\nbogus = 1\n")
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "config error" in err
    assert cli.main(["run", "--config", str(bad), "--seed", "-3",
                     "--out", str(tmp_path)]) == 1


def test_cli_sweep(tmp_path, capsys):
    cfg_file = tmp_path / "s.cfg"
    cfg_file.write_text("scheme = ro\nengine = nojump\nkappa = 0.01\n"
                        "t.points = 30\nsweep.param1 = gamma\nsweep.min1 = 0\n"
                        "sweep.max1 = 0.04\nsweep.steps1 = 3\n")
    rc = cli.main(["sweep", "--config", str(cfg_file), "--out", str(tmp_path / "o")])
    assert rc == 0
    assert "wrote sweep:" in capsys.readouterr().out
    header, rows = read_csv(tmp_path / "o" / "sweep.csv")
    assert rows.shape[0] == 3


def test_cli_check_passes(capsys):
    rc = cli.main(["check"])
    out = capsys.readouterr().out
    assert rc == 0
    lines = [l for l in out.splitlines() if l]
    assert len(lines) >= 10
    assert all(l.startswith("PASS") for l in lines)
