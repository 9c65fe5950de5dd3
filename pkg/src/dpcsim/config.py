"""INI-style run configuration: parse, validate, bundled scenarios.

Format: ``key = value`` within named sections.  All sections and keys are
optional (defaults below), but unknown sections or keys are rejected by
name — a typo never silently falls back to a default.

::

    [plant]                      [scenario]
    E   = 311.0                  duration  = 2.5
    f   = 60.0                   step_size = 1e-4
    L   = 0.012                  v_ref     = 0:1000, 1.25:800
    r_L = 0.1                    q_ref     = 0:0, 1.75:5000
    C   = 3.3e-3                 load      = 0:200
    R_l = 200.0
                                 [controller]
    [gains]                      kind = bsc            ; or adaptive
    k_v = 500.0
    k_s = 500.0                  [disturbance]
    k_q = 500.0                  delta_a = 0.0
    gamma = 1e-3                 delta_b = 0.0
    rho_p = 0.5                  delta_c = 0.0
    rho_q = 0.5                  delta_d = 0.0
    disturbance_mode = none      g_uses_rate = false
    adaptation_variant = code
    up_estimate_source = estimate-hat
    freeze_estimate = false      [initial]
                                 x_p = 0.0
                                 P = 0.0
                                 Q = 0.0
                                 estimate =            ; empty -> nominal

Profiles are comma-separated ``time:value`` pairs, first time 0, strictly
increasing.  Two scenarios ship with the package: ``canonical.ini`` (fixed
load, both reference steps) and ``comparison.ini`` (adds the 200 -> 100 ohm
load step for controller comparison and estimate tracking).
"""
from __future__ import annotations

import configparser
from dataclasses import replace
from importlib.resources import files
from pathlib import Path

from .controllers import ControllerGains
from .engine import ScenarioProfile, SimConfig
from .model import ConfigError, DisturbanceSpec, RectifierParams

BUNDLED_CONFIGS = ("canonical.ini", "comparison.ini")

_FLOAT_KEYS = {
    "plant": ("E", "f", "L", "r_L", "C", "R_l"),
    "gains": ("k_v", "k_s", "k_q", "gamma", "rho_p", "rho_q"),
    "scenario": ("duration", "step_size"),
    "disturbance": ("delta_a", "delta_b", "delta_c", "delta_d"),
    "initial": ("x_p", "P", "Q"),
}
_KNOWN_KEYS = {
    "plant": {"E", "f", "L", "r_L", "C", "R_l"},
    "gains": {"k_v", "k_s", "k_q", "gamma", "rho_p", "rho_q", "disturbance_mode",
              "adaptation_variant", "up_estimate_source", "freeze_estimate"},
    "scenario": {"duration", "step_size", "v_ref", "q_ref", "load"},
    "controller": {"kind"},
    "disturbance": {"delta_a", "delta_b", "delta_c", "delta_d", "g_uses_rate"},
    "initial": {"x_p", "P", "Q", "estimate"},
}

_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _parse_float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}")


def _parse_bool(section: str, key: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ConfigError(f"[{section}] {key}: expected true/false, got {raw!r}")


def _parse_profile(section: str, key: str, raw: str):
    points = []
    for chunk in raw.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        time_str, sep, value_str = chunk.partition(":")
        if not sep:
            raise ConfigError(
                f"[{section}] {key}: expected time:value pairs, got {chunk!r}")
        try:
            points.append((float(time_str), float(value_str)))
        except ValueError:
            raise ConfigError(
                f"[{section}] {key}: non-numeric entry in pair {chunk!r}")
    if not points:
        raise ConfigError(f"[{section}] {key}: profile is empty")
    return tuple(points)


def _from_parser(cp: configparser.ConfigParser, origin: str) -> SimConfig:
    for section in cp.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"{origin}: unknown section [{section}]")
        for key in cp[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"{origin}: unknown key [{section}] {key}")

    def floats(section: str) -> dict:
        out = {}
        if cp.has_section(section):
            for key in _FLOAT_KEYS.get(section, ()):
                if key in cp[section]:
                    out[key] = _parse_float(section, key, cp[section][key])
        return out

    plant = RectifierParams(**floats("plant"))

    gkw = floats("gains")
    if cp.has_option("gains", "disturbance_mode"):
        gkw["disturbance_mode"] = cp["gains"]["disturbance_mode"].strip()
    if cp.has_option("gains", "adaptation_variant"):
        gkw["adaptation_variant"] = cp["gains"]["adaptation_variant"].strip()
    if cp.has_option("gains", "up_estimate_source"):
        gkw["up_estimate_source"] = cp["gains"]["up_estimate_source"].strip()
    if cp.has_option("gains", "freeze_estimate"):
        gkw["freeze_estimate"] = _parse_bool("gains", "freeze_estimate",
                                             cp["gains"]["freeze_estimate"])
    gains = ControllerGains(**gkw)

    skw = floats("scenario")
    for key in ("v_ref", "q_ref", "load"):
        if cp.has_option("scenario", key):
            skw[key] = _parse_profile("scenario", key, cp["scenario"][key])
    scenario = ScenarioProfile(**skw)

    dkw = floats("disturbance")
    if cp.has_option("disturbance", "g_uses_rate"):
        dkw["g_uses_rate"] = _parse_bool("disturbance", "g_uses_rate",
                                         cp["disturbance"]["g_uses_rate"])
    disturbance = DisturbanceSpec(**dkw)

    controller = "bsc"
    if cp.has_option("controller", "kind"):
        controller = cp["controller"]["kind"].strip()

    ikw = floats("initial")
    initial_state = (ikw.get("x_p", 0.0), ikw.get("P", 0.0), ikw.get("Q", 0.0))
    initial_estimate = None
    if cp.has_option("initial", "estimate"):
        raw = cp["initial"]["estimate"].strip()
        if raw:
            initial_estimate = _parse_float("initial", "estimate", raw)

    config = SimConfig(plant=plant, gains=gains, scenario=scenario,
                       disturbance=disturbance, controller=controller,
                       initial_state=initial_state,
                       initial_estimate=initial_estimate)
    config.validate()
    return config


def _new_parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, strict=True,
                                   inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keys are case-sensitive (E vs e, R_l)
    return cp


def load_config(path) -> SimConfig:
    """Parse and validate a config file into a :class:`SimConfig`."""
    path = Path(path)
    cp = _new_parser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cp.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}")
    return _from_parser(cp, str(path))


def load_config_text(text: str, origin: str = "<config>") -> SimConfig:
    """Parse config text (used for the bundled scenarios)."""
    cp = _new_parser()
    try:
        cp.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {origin}: {exc}")
    return _from_parser(cp, origin)


def load_bundled(name: str) -> SimConfig:
    """Load one of the configs shipped with the package."""
    if name not in BUNDLED_CONFIGS:
        raise ConfigError(f"no bundled config {name!r}; available: {BUNDLED_CONFIGS}")
    text = files("dpcsim").joinpath("data", name).read_text(encoding="utf-8")
    return load_config_text(text, origin=f"bundled:{name}")


# ---------------------------------------------------------------------------
# parameter sweeps

def _set_load_final(config: SimConfig, value: float) -> SimConfig:
    pts = config.scenario.load
    new_pts = pts[:-1] + ((pts[-1][0], float(value)),)
    return replace(config, scenario=replace(config.scenario, load=new_pts))


SWEEP_PARAMETERS = {
    "gains.k_v": lambda c, v: replace(c, gains=replace(c.gains, k_v=v)),
    "gains.k_s": lambda c, v: replace(c, gains=replace(c.gains, k_s=v)),
    "gains.k_q": lambda c, v: replace(c, gains=replace(c.gains, k_q=v)),
    "gains.gamma": lambda c, v: replace(c, gains=replace(c.gains, gamma=v)),
    "scenario.step_size": lambda c, v: replace(
        c, scenario=replace(c.scenario, step_size=v)),
    "scenario.load_final": _set_load_final,
}


def apply_sweep_value(config: SimConfig, name: str, value: float) -> SimConfig:
    """Return a copy of ``config`` with one sweep parameter replaced."""
    try:
        setter = SWEEP_PARAMETERS[name]
    except KeyError:
        raise ConfigError(
            f"unknown sweep parameter {name!r}; choose from "
            f"{', '.join(sorted(SWEEP_PARAMETERS))}")
    out = setter(config, float(value))
    out.validate()
    return out
