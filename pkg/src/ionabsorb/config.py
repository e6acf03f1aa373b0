"""Experiment configuration files.

Plain ``[section]`` / ``key = value`` text with ``#`` comments.  Every key
has a type, a default and (where it matters) a constraint; unknown keys,
bad values and violated constraints raise :class:`ConfigError` carrying the
line number.  Lists are comma separated; ``a:b:n`` expands to ``n`` evenly
spaced values from ``a`` to ``b``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .polarization import PolarizationState
from .protocols import AnalysisConfig, JumpExperimentConfig, PulsedConfig, calibrate_coincidences
from .sim import SCHEMES, TrajectoryConfig
from .source import Absorber, PairPolarizationState, SourceConfig
from .transfer import TransferConfig

CONFIG_DIR_ENV = "IONABSORB_CONFIG_DIR"
PRESET_DIR = Path(__file__).parent / "presets"
KINDS = ("simulate", "jumps", "g2", "polar-scan", "spectrum", "entangle-scan", "transfer", "report")
POL_LABELS = ("H", "V", "D", "A", "L", "R")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _floats(s: str) -> tuple[float, ...]:
    s = s.strip()
    if s.count(":") == 2 and "," not in s:
        a, b, n = s.split(":")
        n = int(n)
        if n < 1:
            raise ValueError("range needs at least one point")
        return tuple(float(x) for x in np.linspace(float(a), float(b), n))
    return tuple(float(x) for x in s.split(",") if x.strip())


def _strs(s: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in s.split(",") if x.strip())


def _choice(*options):
    def parse(s: str) -> str:
        v = s.strip()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {v!r}")
        return v
    return parse


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _unit(x):
    return 0 <= x <= 1


# section -> key -> (parser, default, constraint, description)
SCHEMA: dict[str, dict[str, tuple]] = {
    "experiment": {
        "kind": (_choice(*KINDS), "simulate", None, "subcommand this file is meant for"),
        "master_seed": (int, 0, _nonneg, "root of all random streams"),
        "trajectories": (int, 1, _pos, "independent trajectories for simulate"),
    },
    "trajectory": {
        "scheme": (_choice(*SCHEMES), "B", None, "absorption scheme"),
        "duration": (float, 60.0, _nonneg, "simulated time, s"),
        "r_on": (float, 5e4, _pos, "bright fluorescence detection rate, 1/s"),
        "r_dark": (float, 500.0, _nonneg, "background detection rate, 1/s"),
        "pump_rate_850": (float, 1.0, _nonneg, "bright->dark pumping rate, 1/s"),
        "tau0": (float, 1.11, _pos, "D5/2 lifetime, s (measured value)"),
        "absorption_peak_rate": (float, 0.0, _nonneg, "matched absorptions at line centre, 1/s"),
        "detection_efficiency_393": (float, 0.1, _unit, "393 nm herald detection efficiency"),
        "jitter_fwhm": (float, 1e-9, _nonneg, "detector timing jitter FWHM, s"),
        "resolution_ps": (int, 1000, _pos, "time-tag tick, ps"),
    },
    "source": {
        "pair_rate": (float, 0.0, _nonneg, "pairs per second into the raw band"),
        "raw_bandwidth_fwhm": (float, 200.0, _pos, "raw SPDC bandwidth, GHz"),
        "filter_fwhm": (float, 22.0, _pos, "herald filter FWHM, MHz"),
        "filter_detuning": (float, 0.0, None, "herald filter detuning, MHz"),
        "pump_offset": (float, 0.0, None, "pump detuning from the locked point, MHz"),
        "herald_efficiency": (float, 1.0, _unit, "herald arm detection efficiency"),
        "splitter": (_choice("PBS", "NPBS"), "PBS", None, "pair separation"),
        "signal_polarization": (_choice(*POL_LABELS), "H", None, "signal polarization (PBS)"),
        "pair_state": (_choice("psi+", "psi-", "phi+", "phi-"), "psi+", None, "Bell state (NPBS)"),
        "werner_p": (float, 1.0, _unit, "Werner mixing parameter (NPBS)"),
    },
    "absorber": {
        "accepted": (_choice("none", *POL_LABELS), "none", None, "accepted signal polarization"),
        "atom_fwhm": (float, 22.0, _pos, "854 nm line width, MHz"),
    },
    "analysis": {
        "t_b": (float, 1e-3, _pos, "count bin, s"),
        "N": (int, 10, lambda x: x >= 2, "moving-average buffer, detections"),
        "g2_bin": (float, 2e-3, _pos, "delay histogram bin, s"),
        "g2_range": (float, 0.2, _pos, "delay histogram half range, s"),
        "reference": (_bool, True, None, "also run with the source blocked"),
    },
    "calibration": {
        "enabled": (_bool, False, None, "derive source settings from coincidence targets"),
        "peak": (float, 83.0, _pos, "expected heralded coincidences"),
        "background": (float, 13.6, _pos, "expected accidentals per bin"),
        "added_rate": (float, 0.581, _pos, "dark-period shortening rate, 1/s"),
    },
    "pulsed": {
        "duration": (float, 120.0, _pos, "simulated time per setting, s"),
        "r_on": (float, 5e4, _pos, "bright detection rate, 1/s"),
        "r_dark": (float, 500.0, _nonneg, "background detection rate, 1/s"),
        "tau0": (float, 1.11, _pos, "D5/2 lifetime, s"),
        "absorption_peak_rate": (float, 100.0, _pos, "matched absorptions at line centre, 1/s"),
        "herald_efficiency": (float, 0.5, _unit, "herald arm efficiency"),
        "filter_fwhm": (float, 22.0, _pos, "herald filter FWHM, MHz"),
        "atom_fwhm": (float, 22.0, _pos, "854 nm line width, MHz"),
        "field_gauss": (float, 3.0, _nonneg, "magnetic field, G"),
        "cooling": (float, 5e-3, _pos, "cooling phase, s"),
        "pumping": (float, 0.2e-3, _pos, "optical pumping phase, s"),
        "detection": (float, 2e-3, _pos, "detection window, s"),
        "coincidence_bin": (float, 10e-6, _pos, "coincidence grid, s"),
        "lag_range": (float, 1e-3, _pos, "histogram half range, s"),
        "jitter_fwhm": (float, 1e-9, _nonneg, "timing jitter FWHM, s"),
    },
    "scan": {
        "settings": (_strs, ("R", "L", "H", "V", "D", "A"), None, "photon polarizations"),
        "preparation": (_choice("sigma-", "sigma+"), "sigma-", None, "accepted circular polarization"),
        "filter_detunings": (_floats, tuple(np.linspace(-80, 80, 17)), None, "herald filter detunings, MHz"),
        "basis": (_choice("RL", "HV", "DA"), "HV", None, "entanglement basis"),
        "hwp_angles": (_floats, tuple(np.arange(12) * 7.5), None, "herald half-wave plate angles, deg"),
    },
    "transfer": {
        "n_inputs": (int, 1000, _pos, "Haar-random input photons"),
        "pulse_area_error": (float, 0.0, None, "relative pulse-area error"),
        "jitter_fwhm": (float, 0.0, _nonneg, "herald timing jitter FWHM, s"),
        "zeeman_splitting": (float, 10.0, _nonneg, "qubit splitting, MHz"),
        "detection_efficiency_393": (float, 1.0, _unit, "393 nm detection efficiency"),
        "absorption_probability": (float, 1.0, _unit, "absorption probability per attempt"),
        "exposure": (float, 1e-3, _pos, "exposure window, s"),
        "phase_tracking": (_bool, True, None, "correct the Zeeman phase from the herald time"),
    },
}


@dataclass
class ExperimentConfig:
    values: dict[str, dict] = field(default_factory=dict)

    def __post_init__(self):
        full = {s: {k: spec[1] for k, spec in keys.items()} for s, keys in SCHEMA.items()}
        for s, kv in self.values.items():
            full[s].update(kv)
        self.values = full

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    @property
    def kind(self) -> str:
        return self["experiment"]["kind"]

    @property
    def master_seed(self) -> int:
        return self["experiment"]["master_seed"]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        vals = {s: dict(kv) for s, kv in self.values.items()}
        vals["experiment"]["master_seed"] = int(seed)
        return ExperimentConfig(vals)

    def source(self) -> SourceConfig:
        s = self["source"]
        state = PairPolarizationState.werner(s["werner_p"], s["pair_state"])
        return SourceConfig(pair_rate=s["pair_rate"], raw_bandwidth_fwhm=s["raw_bandwidth_fwhm"],
                            filter_fwhm=s["filter_fwhm"], filter_detuning=s["filter_detuning"],
                            pump_offset=s["pump_offset"], herald_efficiency=s["herald_efficiency"],
                            splitter=s["splitter"],
                            signal_polarization=PolarizationState.from_label(s["signal_polarization"]),
                            pair_state=state)

    def trajectory(self) -> TrajectoryConfig:
        t, a = self["trajectory"], self["absorber"]
        acc = None if a["accepted"] == "none" else PolarizationState.from_label(a["accepted"])
        src = self.source()
        peak = t["absorption_peak_rate"]
        cal = self["calibration"]
        if cal["enabled"]:
            c = calibrate_coincidences(cal["peak"], cal["background"], t["duration"],
                                       self["analysis"]["g2_bin"], cal["added_rate"], t["tau0"],
                                       t["pump_rate_850"], src, a["atom_fwhm"])
            src = replace(src, pair_rate=c["pair_rate"], herald_efficiency=c["herald_efficiency"])
            peak = c["absorption_peak_rate"]
        return TrajectoryConfig(scheme=t["scheme"], duration=t["duration"], r_on=t["r_on"],
                                r_dark=t["r_dark"], pump_rate_850=t["pump_rate_850"], tau0=t["tau0"],
                                source=src, absorption_peak_rate=peak,
                                detection_efficiency_393=t["detection_efficiency_393"],
                                absorber=Absorber(acc, ((0.0, 1.0),), a["atom_fwhm"]),
                                jitter_fwhm=t["jitter_fwhm"], resolution_ps=t["resolution_ps"],
                                master_seed=self.master_seed)

    def analysis(self) -> AnalysisConfig:
        a = self["analysis"]
        return AnalysisConfig(a["t_b"], a["N"], a["g2_bin"], a["g2_range"])

    def jump_experiment(self) -> JumpExperimentConfig:
        return JumpExperimentConfig(self.trajectory(), self.analysis(), self["analysis"]["reference"])

    def pulsed(self) -> PulsedConfig:
        a = self["analysis"]
        return PulsedConfig(**self["pulsed"], t_b=a["t_b"], N=a["N"], master_seed=self.master_seed)

    def transfer(self) -> TransferConfig:
        kv = dict(self["transfer"])
        kv.pop("n_inputs")
        return TransferConfig(**kv)


def parse_config(text: str) -> ExperimentConfig:
    """Parse configuration text into a fully defaulted, validated config."""
    values: dict[str, dict] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            values.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any section", lineno)
        key, val = (x.strip() for x in line.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if key in values[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        parser, _, check, _ = SCHEMA[section][key]
        try:
            v = parser(val)
        except ValueError as e:
            raise ConfigError(f"{section}.{key}: {e}", lineno) from None
        if isinstance(v, float) and not np.isfinite(v):
            raise ConfigError(f"{section}.{key}: value must be finite", lineno)
        if check is not None and not check(v):
            raise ConfigError(f"{section}.{key} = {val} violates its constraint", lineno)
        values[section][key] = v
    cfg = ExperimentConfig(values)
    try:
        cfg.trajectory()
        cfg.source()
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return cfg


def format_config(cfg: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config` for the stored values."""
    out = []
    for section, keys in SCHEMA.items():
        out.append(f"[{section}]")
        for key in keys:
            v = cfg[section][key]
            if isinstance(v, tuple):
                s = ", ".join(repr(float(x)) if not isinstance(x, str) else x for x in v)
            elif isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, float):
                s = repr(v)
            else:
                s = str(v)
            out.append(f"{key} = {s}")
        out.append("")
    return "\n".join(out)


def default_config_text() -> str:
    """Documented template listing every key with its default."""
    out = []
    for section, keys in SCHEMA.items():
        out.append(f"[{section}]")
        for key, (_, default, _, doc) in keys.items():
            if isinstance(default, tuple):
                default = ", ".join(f"{x:g}" if not isinstance(x, str) else x for x in default)
            elif isinstance(default, bool):
                default = str(default).lower()
            out.append(f"# {doc}")
            out.append(f"{key} = {default}")
        out.append("")
    return "\n".join(out)


def config_dir() -> Path:
    env = os.environ.get(CONFIG_DIR_ENV)
    return Path(env) if env else PRESET_DIR


def resolve_config(name: str | os.PathLike) -> Path:
    """A path as given, else ``<config dir>/<name>[.cfg]``, else a shipped preset."""
    p = Path(name)
    if p.is_file():
        return p
    for d in (config_dir(), PRESET_DIR):
        for cand in (d / p, d / f"{p}.cfg"):
            if cand.is_file():
                return cand
    raise FileNotFoundError(f"config {str(name)!r} not found (searched {config_dir()} and presets)")


def load_config(name: str | os.PathLike) -> ExperimentConfig:
    return parse_config(resolve_config(name).read_text(encoding="utf-8"))
