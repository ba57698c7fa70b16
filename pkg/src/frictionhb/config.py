"""Scenario configuration files.

INI-style text with sections. Keys that appear before the first section
header belong to ``[scenario]``, so a two-line file such as::

    experiment = frf
    alpha = 0

is a complete configuration. The accepted keys are listed in ``SCHEMA``;
anything else is rejected with an error naming the key.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .model import Table1Params

EXPERIMENTS = ("frf", "optcurve", "hysteresis", "uniqueness", "transient")
METHODS = ("coupled", "uncoupled_u1", "uncoupled_u2", "dti")
PRELOADS = ("U1", "U2")
OUTPUT_ENV = "FRICTIONHB_OUTPUT_DIR"


class ConfigError(ValidationError):
    """Invalid configuration; ``key`` is ``section.name`` when known."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


def _float(s):
    return float(s)


def _int(s):
    v = float(s)
    if v != int(v):
        raise ValueError(f"{s!r} is not an integer")
    return int(v)


def _floats(s):
    return tuple(float(x) for x in s.replace(",", " ").split())


def _words(s):
    return tuple(x.strip() for x in s.split(",") if x.strip())


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


# section -> key -> (parser, check, description)
SCHEMA = {
    "scenario": {
        "experiment": (str, lambda v: v in EXPERIMENTS, f"one of {', '.join(EXPERIMENTS)}"),
        "alpha": (_float, lambda v: 0 <= v < 90, "wall angle in degrees, 0 <= alpha < 90"),
        "method": (_words, lambda v: len(v) > 0 and all(m in METHODS for m in v),
                   f"comma-separated subset of {', '.join(METHODS)}"),
        "f_exc": (_floats, lambda v: len(v) > 0 and all(x > 0 for x in v),
                  "excitation amplitudes in N, all > 0"),
        "ratios": (_floats, lambda v: len(v) > 0 and all(x > 0 for x in v),
                   "preload-to-excitation ratios, all > 0 (alternative to f_exc)"),
        "frequency": (_float, _positive, "excitation frequency in Hz, > 0"),
        "preload": (str.upper, lambda v: v in PRELOADS, "U1 or U2"),
        "duration": (_float, _positive, "simulated time after the preload in s, > 0"),
    },
    "system": {
        "m": (_float, _positive, "kg, > 0"),
        "k_x": (_float, _positive, "N/m, > 0"),
        "k_y": (_float, _positive, "N/m, > 0"),
        "k_t": (_float, _positive, "N/m, > 0"),
        "k_n": (_float, _positive, "N/m, > 0"),
        "c_x": (_float, _positive, "N s/m, > 0"),
        "c_y": (_float, _positive, "N s/m, > 0"),
        "mu": (_float, _nonneg, ">= 0"),
        "F_pl": (_float, _nonneg, "N, >= 0"),
    },
    "solver": {
        "H": (_int, lambda v: 1 <= v <= 64, "harmonics, 1..64"),
        "J": (_int, lambda v: 4 <= v <= 65536, "time samples per period, 4..65536"),
        "newton_tol": (_float, _positive, "N, > 0"),
        "max_newton_iters": (_int, _positive, "> 0"),
        "max_cycles": (_int, _positive, "> 0"),
        "dt": (_float, _positive, "time step in s, > 0"),
        "workers": (_int, _positive, "processes, > 0"),
    },
    "grid": {
        "f_min": (_float, _positive, "Hz, > 0"),
        "f_max": (_float, _positive, "Hz, > 0"),
        "f_step": (_float, _positive, "Hz, > 0"),
    },
    "output": {
        "directory": (str, lambda v: len(v) > 0, "output directory"),
        "decimate": (_int, _positive, "keep every n-th transient sample, > 0"),
    },
}

_HYSTERESIS_DEFAULT = (1.0, 24.0, 60.0)
_ALPHA45 = ("uniqueness", "transient")
_TOP = "\x00top"


@dataclass
class ScenarioConfig:
    """Validated scenario with every default filled in."""

    experiment: str = "frf"
    alpha_deg: float = 0.0
    methods: tuple = ("coupled",)
    f_exc: tuple = None
    frequency: float = 132.0
    ratio: float = 84.0
    preload: str = "U1"
    duration: float = 1.0
    params: Table1Params = field(default_factory=Table1Params)
    H: int = 5
    J: int = 256
    newton_tol: float = 1e-6
    max_newton_iters: int = 40
    max_cycles: int = 50
    dt: float = None
    workers: int = 1
    f_min: float = 80.0
    f_max: float = 160.0
    f_step: float = 0.5
    output_dir: str = "results"
    decimate: int = 1
    source: str = None

    @property
    def alpha(self):
        """Wall angle in radians."""
        return math.radians(self.alpha_deg)

    @property
    def grid(self):
        return np.arange(self.f_min, self.f_max + 1e-9 * self.f_step, self.f_step)

    @property
    def hbm_overrides(self):
        return {"H": self.H, "J": self.J, "newton_tol": self.newton_tol,
                "max_newton_iters": self.max_newton_iters, "max_cycles": self.max_cycles}

    def as_dict(self):
        d = dataclasses.asdict(self)
        d["params"] = {k: v for k, v in dataclasses.asdict(self.params).items()}
        d["methods"] = list(self.methods)
        d["f_exc"] = list(self.f_exc)
        return d


def _read(text, source):
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
                                   default_section="\x00defaults")
    cp.optionxform = str
    try:
        cp.read_string(f"[{_TOP}]\n" + text, source=source)
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"section [{exc.section}] appears twice", exc.section) from None
    except configparser.DuplicateOptionError as exc:
        key = f"{exc.section}.{exc.option}"
        raise ConfigError(f"{key}: key appears twice", key) from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc.message.splitlines()[0]}") from None
    return cp


def parse_text(text, source="<string>", env=None, experiment=None):
    """Parse configuration text; see :func:`parse_config`."""
    cp = _read(text, source)
    values = {}
    for raw_section in cp.sections():
        section = "scenario" if raw_section == _TOP else raw_section
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", section)
        for key, raw in cp.items(raw_section):
            name = f"{section}.{key}"
            if name in values:
                raise ConfigError(f"{name}: key appears twice", name)
            if key not in SCHEMA[section]:
                raise ConfigError(f"{name}: unknown key", name)
            parse, check, doc = SCHEMA[section][key]
            try:
                val = parse(raw.strip())
            except ValueError:
                raise ConfigError(f"{name}: cannot parse {raw.strip()!r} ({doc})", name) from None
            if isinstance(val, float) and not math.isfinite(val):
                raise ConfigError(f"{name}: value must be finite", name)
            if isinstance(val, tuple) and any(isinstance(x, float) and not math.isfinite(x)
                                              for x in val):
                raise ConfigError(f"{name}: values must be finite", name)
            if not check(val):
                raise ConfigError(f"{name}: {raw.strip()!r} out of range ({doc})", name)
            values[name] = val
    if experiment is not None:
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {experiment!r}", "scenario.experiment")
        given = values.setdefault("scenario.experiment", experiment)
        if given != experiment:
            raise ConfigError(f"scenario.experiment: file asks for {given!r} but "
                              f"{experiment!r} was requested", "scenario.experiment")
    return _build(values, source, os.environ if env is None else env)


def parse_config(path, env=None, experiment=None):
    """Read and validate a scenario file.

    Parameters
    ----------
    path : str or os.PathLike
    env : mapping, optional
        Environment used for the output directory override
        (``FRICTIONHB_OUTPUT_DIR``); defaults to ``os.environ``.
    experiment : str, optional
        Experiment requested by the caller; must agree with the file if the
        file names one.

    Returns
    -------
    ScenarioConfig

    Raises
    ------
    ConfigError
        Missing file, unknown section or key, unparsable or out-of-range value.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise ConfigError(f"configuration file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read(), source=path, env=env, experiment=experiment)


def _build(values, source, env):
    sys_vals = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("system.")}
    try:
        params = Table1Params(**sys_vals)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None

    get = lambda key, default: values.get(key, default)
    if "scenario.f_exc" in values and "scenario.ratios" in values:
        raise ConfigError("scenario.ratios: give either f_exc or ratios, not both",
                          "scenario.ratios")
    experiment = get("scenario.experiment", "frf")
    if "scenario.ratios" in values:
        if params.F_pl == 0:
            raise ConfigError("scenario.ratios: needs F_pl > 0", "scenario.ratios")
        f_exc = tuple(params.F_pl / r for r in values["scenario.ratios"])
    elif "scenario.f_exc" in values:
        f_exc = values["scenario.f_exc"]
    elif experiment == "hysteresis":
        f_exc = _HYSTERESIS_DEFAULT
    else:
        f_exc = params.F_exc

    cfg = ScenarioConfig(
        experiment=experiment,
        alpha_deg=get("scenario.alpha", 45.0 if experiment in _ALPHA45 else 0.0),
        methods=get("scenario.method", ("coupled",)),
        f_exc=tuple(f_exc),
        frequency=get("scenario.frequency", 132.0),
        ratio=values["scenario.ratios"][0] if "scenario.ratios" in values else 84.0,
        preload=get("scenario.preload", "U1"),
        duration=get("scenario.duration", 1.0),
        params=params,
        H=get("solver.H", 5),
        J=get("solver.J", 256),
        newton_tol=get("solver.newton_tol", 1e-6),
        max_newton_iters=get("solver.max_newton_iters", 40),
        max_cycles=get("solver.max_cycles", 50),
        dt=get("solver.dt", None),
        workers=get("solver.workers", 1),
        f_min=get("grid.f_min", 80.0),
        f_max=get("grid.f_max", 160.0),
        f_step=get("grid.f_step", 0.5),
        output_dir=env.get(OUTPUT_ENV) or get("output.directory", "results"),
        decimate=get("output.decimate", 1),
        source=source,
    )
    if cfg.J < 2 * cfg.H + 2:
        raise ConfigError(f"solver.J: {cfg.J} too small for H={cfg.H} (need >= {2 * cfg.H + 2})",
                          "solver.J")
    if cfg.f_max <= cfg.f_min:
        raise ConfigError("grid.f_max: must exceed grid.f_min", "grid.f_max")
    if experiment in ("uniqueness", "transient") and params.F_pl == 0:
        raise ConfigError("system.F_pl: must be > 0 for this experiment", "system.F_pl")
    return cfg


def default_config(experiment="frf", env=None):
    return parse_text("", env=env, experiment=experiment)
