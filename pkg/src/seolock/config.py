"""Run configuration: INI-style ``[section]`` / ``key = value`` files.

Every key has a type and a default in :data:`SCHEMA`; unknown sections or
keys are errors. Some commands start from different defaults (for instance
the staircase uses the stronger modulation at which all order-5 plateaus are
resolved); :data:`COMMAND_DEFAULTS` holds those overrides, and values from
the file always win.

``[run] level`` selects which parameter set is authoritative:

``map``
    ``[map]`` alpha and beta_f. Commands that integrate the envelope use the
    ``[envelope]`` coefficients with a forcing normalised to the map.
``envelope``
    ``[envelope]`` coefficients; the modulation amplitude is ``[modulation]
    P_p`` (which then needs ``[coupling]``) or else ``[map] beta_f``.
``physical``
    ``[physical]`` device parameters; the envelope coefficients and the
    thermal coupling are derived from them.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .circle_map import MapParams, Rectangular, Sinusoidal
from .envelope import (
    BelowThreshold,
    EnvelopeParams,
    ModulationSpec,
    ThermalCoupling,
    calibration_power,
    derive_map_params,
    hopf_frequency,
    seo_amplitude,
)
from .physical import PhysicalParams, envelope_from_physical, thermal_coupling

__all__ = ["ConfigError", "SCHEMA", "COMMAND_DEFAULTS", "RunConfig", "Resolved", "load_config",
           "resolve"]


class ConfigError(ValueError):
    pass


def _opt_float(s: str) -> Optional[float]:
    return None if s.strip().lower() in ("", "none") else float(s)


_P = PhysicalParams()

# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple[Any, Any]]] = {
    "run": {"level": (str, "map")},
    "map": {
        "alpha": (float, 1.0 / 3.0),
        "beta_f": (float, 0.025),
        "q0": (float, 0.0),
        "n_transient": (int, 1000),
        "n_avg": (int, 100000),
        "n_iter": (int, 200),
        "n2_max": (int, 5),
        "tol": (float, 1e-9),
    },
    "modulation": {
        "waveform": (str, "sinusoidal"),
        "duty": (float, 0.5),
        "n_harmonics": (int, 7),
        "phase0": (float, 0.0),
        "P_p": (_opt_float, None),
    },
    "envelope": {
        "Gamma0": (float, -0.2),
        "Gamma2": (float, 0.2),
        "Omega0": (float, 1.0),
        "Omega2": (float, 0.0),
        "kappa": (float, 0.1),
    },
    "coupling": {
        "theta": (_opt_float, None),
        "eta": (_opt_float, None),
        "I0": (_opt_float, None),
    },
    "physical": {
        "m": (float, _P.m),
        "gamma0": (float, _P.gamma0),
        "omega0": (float, _P.omega0),
        "beta": (float, _P.beta),
        "theta": (float, _P.theta),
        "eta": (float, _P.eta),
        "kappa": (float, _P.kappa),
        "wavelength": (float, _P.wavelength),
        "finesse": (float, _P.finesse),
        "beta_plus": (float, _P.beta_plus),
        "beta_minus": (float, _P.beta_minus),
        "P0": (float, _P.P0),
        "gamma2": (float, _P.gamma2),
        "T_eff": (float, _P.T_eff),
        "detuning": (_opt_float, None),
        "x_R": (_opt_float, None),
    },
    "scan": {
        "alpha_min": (float, 1e-4),
        "alpha_max": (float, 1.0 - 1e-4),
        "n_alpha": (int, 2000),
        "beta_min": (float, 0.0),
        "beta_max": (float, 0.0),
        "n_beta": (int, 1),
        "farey_order": (int, 5),
        "plateau_tol": (float, 1e-4),
    },
    "noise": {
        "seed": (int, 0),
        "Theta": (float, 0.0),
        "ensemble": (int, 1),
    },
    "integration": {
        "dt": (_opt_float, None),
        "n_periods": (float, 200.0),
        "stride": (int, 1),
        "amplitude0": (_opt_float, None),
    },
    "histogram": {
        "n_bins": (int, 20),
        "peak_level": (float, 1.5),
    },
    "verify": {
        "threshold": (float, 1e-2),
        "n_periods": (int, 100),
    },
    "output": {
        "directory": (str, "."),
        "format": (str, "csv"),
    },
}

COMMAND_DEFAULTS: dict[str, dict[str, dict[str, Any]]] = {
    "staircase": {"map": {"beta_f": 0.0355}},
    "tongue": {"scan": {"alpha_min": 0.45, "alpha_max": 0.55, "n_alpha": 201,
                        "beta_min": 0.0, "beta_max": 0.06, "n_beta": 31}},
    "orbit": {"modulation": {"waveform": "rectangular", "duty": 0.25}},
    "cycle": {"modulation": {"waveform": "rectangular", "duty": 0.25}},
    "histogram": {"modulation": {"waveform": "rectangular", "duty": 0.25},
                  "noise": {"Theta": 3e-3},
                  "integration": {"n_periods": 10000.0}},
    "envelope": {"integration": {"n_periods": 200.0}},
    "full": {"run": {"level": "physical"}, "map": {"beta_f": 0.0},
             "integration": {"n_periods": 2000.0, "stride": 10}},
    "verify-map": {"map": {"beta_f": 0.01}},
}


@dataclass
class RunConfig:
    """Resolved key/value table, ``values[section][key]``."""

    values: dict[str, dict[str, Any]]
    source: Optional[str] = None

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def lines(self) -> list[str]:
        out = []
        for sec in SCHEMA:
            for key in SCHEMA[sec]:
                out.append(f"{sec}.{key} = {_fmt(self.values[sec][key])}")
        return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return "none" if v is None else str(v)


def load_config(path: Optional[str | Path], command: Optional[str] = None) -> RunConfig:
    """Parse ``path`` (or nothing) on top of the schema and command defaults."""
    values = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
    for sec, keys in COMMAND_DEFAULTS.get(command or "", {}).items():
        values[sec].update(keys)
    source = None
    if path is not None:
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        cp.optionxform = str  # keys are case-sensitive
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        for sec in cp.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]")
            for key, raw in cp.items(sec):
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key {key!r} in [{sec}]")
                parser = SCHEMA[sec][key][0]
                try:
                    values[sec][key] = parser(raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for [{sec}] {key}: {raw!r}") from exc
        source = str(path)
    if values["run"]["level"] not in ("map", "envelope", "physical"):
        raise ConfigError("[run] level must be map, envelope or physical")
    if values["modulation"]["waveform"] not in ("sinusoidal", "rectangular"):
        raise ConfigError("[modulation] waveform must be sinusoidal or rectangular")
    if values["output"]["format"] != "csv":
        raise ConfigError("[output] format must be csv")
    return RunConfig(values, source)


@dataclass
class Resolved:
    """Parameter objects built from a config, plus cross-derived values for metadata."""

    level: str
    map_params: MapParams
    modulation: ModulationSpec
    envelope: Optional[EnvelopeParams] = None
    physical: Optional[PhysicalParams] = None
    coupling: Optional[ThermalCoupling] = None
    derived: dict[str, Any] = field(default_factory=dict)


def _waveform(cfg: RunConfig):
    m = cfg["modulation"]
    if m["waveform"] == "sinusoidal":
        return Sinusoidal()
    return Rectangular(duty=m["duty"], n_harmonics=m["n_harmonics"])


def resolve(cfg: RunConfig, need_envelope: bool = False) -> Resolved:
    """Build parameter objects; any invalid combination raises :class:`ConfigError`."""
    try:
        return _resolve(cfg, need_envelope)
    except BelowThreshold as exc:
        raise ConfigError(str(exc)) from exc
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def _resolve(cfg: RunConfig, need_envelope: bool) -> Resolved:
    level = cfg["run"]["level"]
    mp, mod_cfg = cfg["map"], cfg["modulation"]
    waveform = _waveform(cfg)
    alpha = mp["alpha"]
    if not 0.0 < alpha < 1.0:
        raise ConfigError("[map] alpha must lie strictly inside (0, 1)")
    P_p = mod_cfg["P_p"]
    if level == "map" and P_p is not None:
        raise ConfigError("[modulation] P_p is not used at level = map; give [map] beta_f")
    if P_p is not None:
        mod = ModulationSpec(ratio=1.0 - alpha, waveform=waveform, P_p=P_p,
                             phase0=mod_cfg["phase0"])
    else:
        mod = ModulationSpec(ratio=1.0 - alpha, waveform=waveform, beta_f=mp["beta_f"],
                             phase0=mod_cfg["phase0"])
    theta_noise = cfg["noise"]["Theta"]
    out = Resolved(level=level, map_params=MapParams(alpha, mp["beta_f"], waveform),
                   modulation=mod)

    if level == "physical":
        kw = dict(cfg["physical"])
        phys = PhysicalParams(**kw)
        env = envelope_from_physical(phys)
        if theta_noise:
            env = env.replace(Theta=theta_noise)
        out.physical, out.envelope = phys, env
        out.coupling = thermal_coupling(phys)
        out.derived.update({
            "x_R": phys.x_R, "Gamma0": env.Gamma0, "Gamma2": env.Gamma2,
            "Omega0": env.Omega0, "Omega2": env.Omega2, "Theta": env.Theta,
            "I0": out.coupling.I0,
        })
    elif level == "envelope" or need_envelope:
        e = cfg["envelope"]
        out.envelope = EnvelopeParams(Gamma0=e["Gamma0"], Gamma2=e["Gamma2"],
                                      Omega0=e["Omega0"], Omega2=e["Omega2"],
                                      Theta=theta_noise, kappa=e["kappa"])
        c = cfg["coupling"]
        if all(c[k] is not None for k in ("theta", "eta", "I0")):
            out.coupling = ThermalCoupling(c["theta"], c["eta"], c["I0"])
        elif P_p is not None:
            raise ConfigError("[modulation] P_p needs [coupling] theta, eta and I0")

    if out.envelope is not None:
        env = out.envelope
        a_r0 = seo_amplitude(env)
        out.derived.update({"A_r0": a_r0, "Omega_H": hopf_frequency(env)})
        if out.coupling is not None:
            cal = calibration_power(env, out.coupling)
            out.derived["calibration_power_W"] = cal
            if P_p is None:
                out.derived["P_p"] = mp["beta_f"] * cal
        out.map_params = derive_map_params(env, mod, out.coupling)
        if P_p is not None:
            out.derived["beta_f"] = out.map_params.beta_f
    return out
