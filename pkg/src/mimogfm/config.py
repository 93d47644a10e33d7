"""Flat ``key = value`` configuration files.

Keys are dotted (``plant.L_f_mH = 3``, ``gains.hinf.k_22 = 45.1987``),
``#`` starts a comment and ``include = other.cfg`` pulls in another file
relative to the including one.  Later assignments override earlier ones.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

from .cascade import CascadeGains
from .closedloop import THETA_NAMES, Disturbance, GainSet
from .gfm import GfmGains, References
from .hinf import DEFAULT_CHANNELS, SynthesisProblem, Weight
from .plant import Bases, ModelDomainError, PlantParams, SIParams, params_from_si
from .sim import Scenario

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

GAIN_KEYS = set(CascadeGains.names()) | set(GfmGains.names())


class ConfigError(ValueError):
    pass


def parse_text(text, source="<string>", base_dir=".", _seen=None):
    """Parse config text into an ordered ``{key: raw string}`` dict."""
    _seen = set() if _seen is None else _seen
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key or not val:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        if key == "include":
            out.update(load_raw(os.path.join(base_dir, val), _seen))
        else:
            out[key] = val
    return out


def load_raw(path, _seen=None):
    _seen = set() if _seen is None else _seen
    real = os.path.realpath(path)
    if real in _seen:
        raise ConfigError(f"include cycle at {path}")
    _seen.add(real)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_text(text, path, os.path.dirname(path) or ".", _seen)


def _float(raw, key):
    try:
        v = float(raw[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not a number: {raw[key]!r}") from exc
    if not math.isfinite(v):
        raise ConfigError(f"{key}: must be finite")
    return v


def _floats(raw, key):
    try:
        return tuple(float(v) for v in raw[key].split(","))
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a comma-separated number list") from exc


def _section(raw, prefix):
    n = len(prefix) + 1
    return {k[n:]: k for k in raw if k.startswith(prefix + ".")}


@dataclass
class Config:
    params: PlantParams
    refs: References
    dist: Disturbance
    gains: dict
    active: str | None = None
    scenarios: dict = field(default_factory=dict)
    synthesis: dict = field(default_factory=dict)
    h: float = 1e-5

    def gain_set(self, name=None):
        name = name or self.active
        if name is None:
            if len(self.gains) != 1:
                raise ConfigError("no active gain set; pass --gains NAME")
            name = next(iter(self.gains))
        if name not in self.gains:
            raise ConfigError(f"undefined gain set {name!r}")
        return name, self.gains[name]

    def synthesis_problem(self, seed=None):
        s = self.synthesis
        initial = s.get("initial", "traditional")
        _, g0 = self.gain_set(initial)
        frozen = tuple(x.strip() for x in s.get("frozen", "k_12, k_14, k_15").split(",") if x.strip())
        unknown = set(frozen) - set(THETA_NAMES)
        if unknown:
            raise ConfigError(f"synth.frozen: unknown gains {sorted(unknown)}")
        kw = {}
        for key, typ in (("budget", int), ("restarts", int), ("seed", int), ("workers", int),
                         ("initial_mesh", float), ("min_mesh", float), ("restart_scale", float)):
            if key in s:
                try:
                    kw[key] = typ(s[key])
                except ValueError as exc:
                    raise ConfigError(f"synth.{key}: bad value {s[key]!r}") from exc
        if seed is not None:
            kw["seed"] = seed
        return g0, SynthesisProblem(theta0=g0.theta(), frozen=frozen, **kw)

    def channels(self):
        return self.synthesis.get("channels", DEFAULT_CHANNELS)


def _plant(raw):
    units = raw.get("plant.units", "si")
    if units == "si":
        sec = _section(raw, "bases")
        bases = Bases(
            S_n=_float(raw, sec["S_n_kW"]) * 1e3 if "S_n_kW" in sec else Bases.S_n,
            V_n=_float(raw, sec["V_n_V"]) if "V_n_V" in sec else Bases.V_n,
            omega_n=2 * math.pi * _float(raw, sec["f_n_Hz"]) if "f_n_Hz" in sec else Bases.omega_n,
            V_dc=_float(raw, sec["V_dc_V"]) if "V_dc_V" in sec else Bases.V_dc,
        )
        need = ("plant.L_f_mH", "plant.C_f_uF", "plant.L_g_mH", "plant.C_dc_uF", "plant.f_sw_kHz")
        missing = [k for k in need if k not in raw]
        if missing:
            raise ConfigError(f"missing plant keys: {missing}")
        si = SIParams(
            L_f=_float(raw, "plant.L_f_mH") / 1e3,
            C_f=_float(raw, "plant.C_f_uF") / 1e6,
            L_g=_float(raw, "plant.L_g_mH") / 1e3,
            C_dc=_float(raw, "plant.C_dc_uF") / 1e6,
            f_sw=_float(raw, "plant.f_sw_kHz") * 1e3,
            R_g_pu=_float(raw, "plant.R_g") if "plant.R_g" in raw else 0.01,
            V_g=_float(raw, "plant.V_g_V") if "plant.V_g_V" in raw else bases.V_n,
            f_g=_float(raw, "plant.f_g_Hz") if "plant.f_g_Hz" in raw else bases.omega_n / (2 * math.pi),
        )
        return params_from_si(si, bases)
    if units == "pu":
        keys = ("L_f", "C_f", "L_g", "R_g", "C_dc", "T_sw", "omega_b", "V_g", "omega_g")
        kw = {k: _float(raw, f"plant.{k}") for k in keys if f"plant.{k}" in raw}
        try:
            return PlantParams(**kw)
        except TypeError as exc:
            raise ConfigError(f"incomplete per-unit plant section: {exc}") from exc
    raise ConfigError(f"plant.units must be 'si' or 'pu', got {units!r}")


def _gains(raw):
    sets = {}
    for key in raw:
        if not key.startswith("gains.") or key == "gains.active":
            continue
        parts = key.split(".")
        if len(parts) != 3:
            raise ConfigError(f"bad gain key {key!r}; expected gains.NAME.GAIN")
        _, name, gain = parts
        if gain not in GAIN_KEYS:
            raise ConfigError(f"{key}: unknown gain {gain!r}")
        sets.setdefault(name, {})[gain] = _float(raw, key)
    out = {}
    for name, vals in sets.items():
        missing = [k for k in THETA_NAMES if k not in vals]
        if missing:
            raise ConfigError(f"gain set {name!r} lacks {missing}")
        try:
            out[name] = GainSet.from_dict(vals)
        except ModelDomainError as exc:
            raise ConfigError(f"gain set {name!r}: {exc}") from exc
    return out


def _scenarios(raw):
    groups = {}
    for key in raw:
        if key.startswith("scenario."):
            parts = key.split(".")
            if len(parts) != 3:
                raise ConfigError(f"bad scenario key {key!r}")
            groups.setdefault(parts[1], {})[parts[2]] = key
    out = {}
    for name, keys in groups.items():
        try:
            kw = {"name": name, "quantity": raw[keys["quantity"]],
                  "pre": _float(raw, keys["pre"]), "post": _float(raw, keys["post"])}
        except KeyError as exc:
            raise ConfigError(f"scenario {name!r} lacks {exc}") from exc
        for opt in ("duration", "step_time", "sample_period"):
            if opt in keys:
                kw[opt] = _float(raw, keys[opt])
        try:
            out[name] = Scenario(**kw)
        except ValueError as exc:
            raise ConfigError(f"scenario {name!r}: {exc}") from exc
    return out


def _synthesis(raw):
    sec = _section(raw, "synth")
    s = {k: raw[full] for k, full in sec.items() if not k.startswith("weight.")}
    weights = {}
    for k, full in sec.items():
        if k.startswith("weight."):
            parts = k.split(".")
            if len(parts) != 3:
                raise ConfigError(f"bad weight key synth.{k}")
            weights.setdefault(parts[1], {})[parts[2]] = full
    if weights:
        channels = []
        # channel order follows the file
        for name in weights:
            w = weights[name]
            try:
                channels.append((int(raw[w["i"]]), int(raw[w["j"]]),
                                 Weight(_floats(raw, w["num"]), _floats(raw, w["den"]))))
            except KeyError as exc:
                raise ConfigError(f"weight {name!r} lacks {exc}") from exc
            except ValueError as exc:
                raise ConfigError(f"weight {name!r}: {exc}") from exc
        s["channels"] = tuple(channels)
    return s


def build(raw):
    """Typed configuration from a raw key/value dict."""
    params = _plant(raw)
    sec = _section(raw, "refs")
    unknown = set(sec) - {"V_dcref", "P_ref", "omega_g_ref", "Q_ref", "V_ref", "i_0", "omega_0", "E_0"}
    if unknown:
        raise ConfigError(f"unknown reference keys {sorted(unknown)}")
    try:
        refs = References(**{k: _float(raw, full) for k, full in sec.items()})
        dist = Disturbance(
            omega_g=_float(raw, "dist.omega_g") if "dist.omega_g" in raw else params.omega_g,
            V_g=_float(raw, "dist.V_g") if "dist.V_g" in raw else params.V_g,
        )
    except ModelDomainError as exc:
        raise ConfigError(str(exc)) from exc
    gains = _gains(raw)
    active = raw.get("gains.active")
    if active is not None and active not in gains:
        raise ConfigError(f"gains.active names undefined gain set {active!r}")
    h = _float(raw, "sim.h") if "sim.h" in raw else 1e-5
    return Config(params, refs, dist, gains, active, _scenarios(raw), _synthesis(raw), h)


def load(paths):
    """Load and merge one or more config files (later files win)."""
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    raw = {}
    for p in paths:
        raw.update(load_raw(p))
    return build(raw)


def fixture(name):
    """Path of a shipped configuration file, e.g. ``fixture("table1.cfg")``."""
    return os.path.join(DATA_DIR, name)


def format_gain_set(name, g, header=None):
    lines = [f"# {header}"] if header else []
    for key, val in g.as_dict().items():
        lines.append(f"gains.{name}.{key} = {val!r}")
    return "\n".join(lines) + "\n"
