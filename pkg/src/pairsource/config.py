"""Flat dotted-key run configuration.

Format: one `key = value` per line, # starts a comment, blank lines
ignored.  Unknown keys, duplicates, type errors and out-of-range values
are rejected with the offending line number.  All rates are in units of
the reference coupling g unless the key says otherwise; times are 1/g.

Normative keys (defaults in parentheses):

  scheme        ro | stirap                      (required)
  engine        auto | coherent | mcwf | lindblad | nojump   (auto)
  g             reference coupling, rad/time     (1.0)
  delta_plus    cavity detuning of the a branch  (0.0)
  delta_minus   cavity detuning of the b branch  (0.0)
  gamma         atomic decay rate                (0.0)
  kappa         cavity decay rate                (0.0)
  eta           detector efficiency              (1.0)
  n_max         excitation truncation            (2)
  pulse.shape   square | gaussian                (square for ro, gaussian for stirap)
  pulse.g_peak  peak coupling                    (g)
  pulse.tau     width; ro: transit half-width, stirap: gaussian width (stirap: 20/g)
  pulse.delay   stirap pulse-1 delay after pulse 2   (pulse.tau)
  pulse.center  stirap cavity-2 pulse center     (4 * pulse.tau)
  pulse.pad     spacing multiplier between ro pulses (4.0)
  t.end         evolution end time               (scheme-dependent, see runner)
  t.points      snapshot grid size               (1000)
  dt.max        integrator step bound            (auto)
  traj.n        trajectory count                 (1)
  seed          master seed, u64                 (0)
  workers       concurrent chunk workers         (1)
  sweep.param1 / sweep.min1 / sweep.max1 / sweep.steps1   (1st sweep axis)
  sweep.param2 / sweep.min2 / sweep.max2 / sweep.steps2   (optional 2nd axis)
"""

from __future__ import annotations

from dataclasses import dataclass

SCHEMES = ("ro", "stirap")
ENGINES = ("auto", "coherent", "mcwf", "lindblad", "nojump")
SHAPES = ("square", "gaussian")

SWEEPABLE = (
    "g", "delta_plus", "delta_minus", "delta_avg", "delta_diff",
    "gamma", "kappa", "eta", "pulse.g_peak", "pulse.tau", "pulse.delay",
    "pulse.pad",
)


class ConfigError(ValueError):
    """Raised for parse, unknown-key, type, and range failures."""


@dataclass(frozen=True)
class SweepAxis:
    param: str
    lo: float
    hi: float
    steps: int


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple[SweepAxis, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.steps for a in self.axes)


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: str
    engine: str = "auto"
    g: float = 1.0
    delta_plus: float = 0.0
    delta_minus: float = 0.0
    gamma: float = 0.0
    kappa: float = 0.0
    eta: float = 1.0
    n_max: int = 2
    pulse_shape: str | None = None
    pulse_g_peak: float | None = None
    pulse_tau: float | None = None
    pulse_delay: float | None = None
    pulse_center: float | None = None
    pulse_pad: float = 4.0
    t_end: float | None = None
    t_points: int = 1000
    dt_max: float | None = None
    n_traj: int = 1
    seed: int = 0
    workers: int = 1
    sweep: SweepSpec | None = None


def _parse_float(raw: str) -> float:
    return float(raw)


def _parse_int(raw: str) -> int:
    v = int(raw, 0)
    return v


def _parse_str(raw: str) -> str:
    return raw


# key -> (parser, config field name or sweep slot)
_KEYS = {
    "scheme": (_parse_str, "scheme"),
    "engine": (_parse_str, "engine"),
    "g": (_parse_float, "g"),
    "delta_plus": (_parse_float, "delta_plus"),
    "delta_minus": (_parse_float, "delta_minus"),
    "gamma": (_parse_float, "gamma"),
    "kappa": (_parse_float, "kappa"),
    "eta": (_parse_float, "eta"),
    "n_max": (_parse_int, "n_max"),
    "pulse.shape": (_parse_str, "pulse_shape"),
    "pulse.g_peak": (_parse_float, "pulse_g_peak"),
    "pulse.tau": (_parse_float, "pulse_tau"),
    "pulse.delay": (_parse_float, "pulse_delay"),
    "pulse.center": (_parse_float, "pulse_center"),
    "pulse.pad": (_parse_float, "pulse_pad"),
    "t.end": (_parse_float, "t_end"),
    "t.points": (_parse_int, "t_points"),
    "dt.max": (_parse_float, "dt_max"),
    "traj.n": (_parse_int, "n_traj"),
    "seed": (_parse_int, "seed"),
    "workers": (_parse_int, "workers"),
    "sweep.param1": (_parse_str, None),
    "sweep.min1": (_parse_float, None),
    "sweep.max1": (_parse_float, None),
    "sweep.steps1": (_parse_int, None),
    "sweep.param2": (_parse_str, None),
    "sweep.min2": (_parse_float, None),
    "sweep.max2": (_parse_float, None),
    "sweep.steps2": (_parse_int, None),
}


def parse_config(text: str) -> dict:
    """Parse raw config text into a typed {key: value} map."""
    values: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(
                f"line {lineno}: duplicate key {key!r} (first set on line {lines[key]})")
        if not val:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        parser = _KEYS[key][0]
        try:
            values[key] = parser(val)
        except ValueError:
            raise ConfigError(
                f"line {lineno}: bad value {val!r} for {key!r}") from None
        lines[key] = lineno
    return values


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _build_sweep(values: dict) -> SweepSpec | None:
    axes = []
    for n in ("1", "2"):
        group = {k: values.get(f"sweep.{k}{n}") for k in ("param", "min", "max", "steps")}
        present = [k for k, v in group.items() if v is not None]
        if not present:
            continue
        missing = [k for k, v in group.items() if v is None]
        if missing:
            raise ConfigError(
                f"sweep axis {n} incomplete: missing sweep.{missing[0]}{n}")
        _require(n == "1" or axes,
                 "sweep.param2 given without sweep.param1")
        param = group["param"]
        _require(param in SWEEPABLE,
                 f"sweep.param{n}: {param!r} is not sweepable (choose from {', '.join(SWEEPABLE)})")
        _require(group["steps"] >= 2, f"sweep.steps{n} must be >= 2")
        _require(group["min"] <= group["max"],
                 f"sweep.min{n} must not exceed sweep.max{n}")
        axes.append(SweepAxis(param, float(group["min"]), float(group["max"]),
                              int(group["steps"])))
    return SweepSpec(tuple(axes)) if axes else None


def validate_config(text: str) -> ExperimentConfig:
    """Parse and validate raw config text, filling documented defaults."""
    values = parse_config(text)
    _require("scheme" in values, "missing required key 'scheme'")

    kwargs = {}
    for key, (_, attr) in _KEYS.items():
        if attr is not None and key in values:
            kwargs[attr] = values[key]
    sweep = _build_sweep(values)
    cfg = ExperimentConfig(sweep=sweep, **kwargs)

    _require(cfg.scheme in SCHEMES, f"scheme must be one of {SCHEMES}, got {cfg.scheme!r}")
    _require(cfg.engine in ENGINES, f"engine must be one of {ENGINES}, got {cfg.engine!r}")
    _require(cfg.g > 0.0, "g must be positive")
    _require(cfg.gamma >= 0.0, "gamma must be non-negative")
    _require(cfg.kappa >= 0.0, "kappa must be non-negative")
    _require(0.0 <= cfg.eta <= 1.0, "eta must lie in [0, 1]")
    _require(cfg.n_max >= 2, "n_max must be >= 2 (the pair manifold needs two excitations)")
    if cfg.pulse_shape is not None:
        _require(cfg.pulse_shape in SHAPES,
                 f"pulse.shape must be one of {SHAPES}, got {cfg.pulse_shape!r}")
    if cfg.scheme == "stirap":
        _require(cfg.pulse_shape in (None, "gaussian"),
                 "pulse.shape: stirap requires gaussian pulses")
    if cfg.scheme == "ro":
        _require(cfg.pulse_tau is None or cfg.pulse_g_peak is None,
                 "pulse.tau and pulse.g_peak are mutually exclusive for scheme ro "
                 "(pulse areas stay calibrated to pi)")
        _require(cfg.pulse_delay is None, "pulse.delay applies only to scheme stirap")
        _require(cfg.pulse_center is None, "pulse.center applies only to scheme stirap")
    if cfg.pulse_g_peak is not None:
        _require(cfg.pulse_g_peak > 0.0, "pulse.g_peak must be positive")
    if cfg.pulse_tau is not None:
        _require(cfg.pulse_tau > 0.0, "pulse.tau must be positive")
    _require(cfg.pulse_pad > 0.0, "pulse.pad must be positive")
    if cfg.t_end is not None:
        _require(cfg.t_end > 0.0, "t.end must be positive")
    _require(cfg.t_points >= 2, "t.points must be >= 2")
    if cfg.dt_max is not None:
        _require(cfg.dt_max > 0.0, "dt.max must be positive")
    _require(cfg.n_traj >= 1, "traj.n must be >= 1")
    _require(0 <= cfg.seed < 2 ** 64, "seed must be a 64-bit unsigned value")
    _require(cfg.workers >= 1, "workers must be >= 1")
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return validate_config(fh.read())
