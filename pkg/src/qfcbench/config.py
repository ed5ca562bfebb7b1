"""Run configuration: flat ``section.key = value`` text with a fixed schema.

Blank lines and ``#`` comments are ignored. Lists are comma separated;
labelled lists use ``label:value`` items; angle grids also accept
``start:stop:step`` (stop excluded). The literal ``auto`` marks values
calibrated at run time from the fidelity budget or the SNR slope.
The defaults reproduce the published device and are what an empty file
yields.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib.resources import files
from typing import Any, Callable

import numpy as np

from .channel import CavitySpec, ChannelParams
from .counts import DetectorParams, SourceDrive
from .qstate import BASIS_LABELS

EXPERIMENTS = ("tomography", "fringes", "snr-sweep", "budget", "efficiency")
AUTO = "auto"
PRESETS = ("published", "snr_sweep", "tomography", "fringes", "budget")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


# -- value codecs ------------------------------------------------------------

def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(text: str) -> int:
    return int(text)


def _str(text: str) -> str:
    return text


def _float_or_auto(text: str):
    return AUTO if text == AUTO else _float(text)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(_float(t) for t in text.split(",") if t.strip())


def _grid(text: str) -> tuple[float, ...]:
    if text.count(":") == 2 and "," not in text:
        start, stop, step = (_float(t) for t in text.split(":"))
        if step <= 0:
            raise ValueError("grid step must be positive")
        return tuple(float(x) for x in np.round(np.arange(start, stop + 1e-9 * step, step), 12))
    return _float_list(text)


def _labelled(text: str) -> tuple[tuple[str, float], ...]:
    out = []
    for item in text.split(","):
        if not item.strip():
            continue
        label, sep, value = item.partition(":")
        if not sep or not label.strip():
            raise ValueError(f"expected label:value, got {item.strip()!r}")
        out.append((label.strip(), _float(value)))
    return tuple(out)


def _labels(text: str) -> tuple[str, ...]:
    labels = tuple(t.strip() for t in text.split(",") if t.strip())
    bad = [l for l in labels if l not in BASIS_LABELS]
    if bad:
        raise ValueError(f"unknown state labels {bad}")
    return labels


def _fmt(v: Any) -> str:
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join(f"{k}:{_fmt(x)}" for k, x in v)
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# -- schema ------------------------------------------------------------------

def _between(lo: float, hi: float, lo_open: bool = False, hi_open: bool = False) -> Callable[[Any], str | None]:
    def check(v):
        if v == AUTO:
            return None
        vals = v if isinstance(v, tuple) else (v,)
        for x in vals:
            x = x[1] if isinstance(x, tuple) else x
            if (x < lo or (lo_open and x == lo)) or (x > hi or (hi_open and x == hi)):
                l, r = "(" if lo_open else "[", ")" if hi_open else "]"
                return f"must lie in {l}{lo:g}, {hi:g}{r}"
        return None

    return check


_PROB = _between(0.0, 1.0)
_POS = _between(0.0, math.inf, lo_open=True)
_NONNEG = _between(0.0, math.inf)


@dataclass(frozen=True)
class Key:
    name: str
    default: Any
    parse: Callable[[str], Any]
    comment: str
    check: Callable[[Any], str | None] | None = None


SCHEMA: tuple[Key, ...] = (
    Key("source.fidelity", 0.989, _float, "initial Bell-state fidelity F_i of the pair source (0.989 +/- 0.002)", _between(0.25, 1.0)),
    Key("source.pulse_rate_hz", 1.0e6, _float, "carved-pulse repetition rate; not published", _POS),
    Key("source.pulse_width_s", 1.0e-8, _float, "10 ns pulses carved from the 1560 nm laser", _POS),
    Key("source.nbar", 0.5, _float, "mean photons per pulse during single-photon tomography", _NONNEG),
    Key("source.pair_rate_hz", 1.0e4, _float, "entangled pairs per second reaching the analyzers; not published", _POS),
    Key("source.tomography_states", BASIS_LABELS, _labels, "input states for tomography"),
    Key("channel.eta_h", 0.273, _float, "H-arm conversion efficiency (internal efficiency 27.3%)", _PROB),
    Key("channel.eta_v", 0.273, _float, "V-arm conversion efficiency; equalised with eta_h", _PROB),
    Key("channel.phase_rad", 0.0, _float, "static interferometer phase; locked to zero"),
    Key("channel.phase_jitter_rad", AUTO, _float_or_auto, "Gaussian phase-lock residual; auto = calibrated from the alignment drop", _NONNEG),
    Key("channel.noise_admixture", AUTO, _float_or_auto, "unpolarized admixture on the converted photon; auto = from the budget", _PROB),
    Key("channel.alignment_phase_fraction", 0.25, _float, "share of the alignment drop attributed to phase jitter", _PROB),
    Key("channel.jitter_draws", 32, _int, "phase samples averaged per count record", _NONNEG),
    Key("channel.internal_efficiency", 0.273, _float, "internal PPLN/W conversion efficiency (27.3 +/- 1.5%)", _PROB),
    Key("channel.losses", (("wdm", 3.0), ("path", 3.7), ("cavity", 1.1), ("fiber", 1.0)), _labelled, "8.8 dB optical loss budget", _NONNEG),
    Key("channel.raman_rate_hz", AUTO, _float_or_auto, "in-gate photonic noise rate; auto = calibrated to snr_slope", _NONNEG),
    Key("channel.snr_slope", 243.0, _float, "SNR per unit nbar used to calibrate raman_rate_hz (243(1))", _POS),
    Key("cavity.fsr_ghz", 150.0, _float, "filter cavity free spectral range", _POS),
    Key("cavity.bandwidth_mhz", 250.0, _float, "filter cavity transmission bandwidth", _POS),
    Key("cavity.conversion_band_ghz", 42.0, _float, "PPLN/W spectral conversion bandwidth (40-44 GHz)", _POS),
    Key("cavity.duty_cycle", 0.06, _float, "temporal duty cycle of the cavity lock", _between(0.0, 1.0, hi_open=True)),
    Key("detector_a.efficiency", 0.5, _float, "SNSPD on the unconverted 1560 nm photon", _PROB),
    Key("detector_a.dark_rate_hz", 250.0, _float, "SNSPD free-running dark count rate", _NONNEG),
    Key("detector_a.window_s", 1.0e-9, _float, "coincidence window; not published", _POS),
    Key("detector_b.efficiency", 0.5, _float, "silicon SPD after the interface", _PROB),
    Key("detector_b.dark_rate_hz", 120.0, _float, "silicon SPD free-running dark count rate", _NONNEG),
    Key("detector_b.window_s", 1.0e-8, _float, "10 ns detection gate", _POS),
    Key("counts.noise_coincidence_hz", 0.02, _float_or_auto, "gated noise coincidences per second; auto = singles-product accidentals", _NONNEG),
    Key("acquisition.snr_integration_s", 100.0, _float, "integration per nbar point (and per blocked reference)", _POS),
    Key("acquisition.fringe_integration_s", 120.0, _float, "integration per fringe angle", _POS),
    Key("acquisition.tomography_shots", 1000.0, _float, "expected detections per tomography setting at unit probability", _POS),
    Key("acquisition.theta_grid_deg", tuple(float(x) for x in range(0, 180, 5)), _grid, "unconverted-arm HWP angles", None),
    Key("acquisition.nbar_grid", tuple(round(0.1 * k, 1) for k in range(1, 11)), _grid, "mean photon numbers of the SNR sweep", _NONNEG),
    Key("analysis.bootstrap_resamples", 500, _int, "Poisson bootstrap resamples per estimate", _between(100, math.inf)),
    Key("analysis.mle_max_iter", 20000, _int, "maximum R rho R iterations", _POS),
    Key("analysis.mle_tol", 1e-13, _float, "per-count log-likelihood gain that ends the iteration", _POS),
    Key("budget.f_net", 0.976, _float, "net fidelity (V+1)/2 from the fringe visibilities", _between(0.0, 1.0)),
    Key("budget.visibilities", (0.949, 0.952), _float_list, "measured net fringe visibilities for |H> and |D>", _PROB),
    Key("budget.noise_drops", (("dark", 0.016), ("raman", 0.015)), _labelled, "fidelity lost to dark counts and Raman noise", _NONNEG),
    Key("budget.stated_total_drop", 0.054, _float, "total drop quoted alongside the ledger", _NONNEG),
    Key("targets.efficiency", 0.036, _float, "device efficiency 3.6 +/- 0.2%"),
    Key("targets.snr_slope", 243.0, _float, "SNR = 243(1) nbar"),
    Key("targets.visibility_h", 0.949, _float, "V_H = 94.9 +/- 0.2%"),
    Key("targets.visibility_d", 0.952, _float, "V_D = 95.2 +/- 0.2%"),
    Key("targets.f_trans", 0.956, _float, "transfer fidelity 0.956 +/- 0.002"),
    Key("targets.f_trans_optimal", 0.985, _float, "optimal transfer fidelity"),
    Key("targets.tomography", (("H", 0.98), ("V", 0.98), ("D", 0.96), ("A", 0.98), ("R", 0.94), ("L", 0.95)), _labelled, "single-photon fidelities after conversion (+/- 0.01)"),
    Key("run.master_seed", 20190801, _int, "master seed; every record derives its own sub-seed"),
    Key("run.output_dir", "out", _str, "directory for counts.csv, result.json, report.txt"),
)

_BY_NAME = {k.name: k for k in SCHEMA}
DEFAULTS = {k.name: k.default for k in SCHEMA}


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["run.master_seed"]

    def channel_params(self) -> ChannelParams:
        v = self.values
        return ChannelParams(
            eta_h=v["channel.eta_h"],
            eta_v=v["channel.eta_v"],
            phase_rad=v["channel.phase_rad"],
            loss_budget_db=v["channel.losses"],
            internal_efficiency=v["channel.internal_efficiency"],
        )

    def cavity(self) -> CavitySpec:
        v = self.values
        return CavitySpec(v["cavity.fsr_ghz"], v["cavity.bandwidth_mhz"], v["cavity.conversion_band_ghz"], v["cavity.duty_cycle"])

    def detector(self, which: str) -> DetectorParams:
        v = self.values
        return DetectorParams(v[f"detector_{which}.efficiency"], v[f"detector_{which}.dark_rate_hz"], v[f"detector_{which}.window_s"])

    def drive(self, nbar: float | None = None) -> SourceDrive:
        v = self.values
        return SourceDrive(v["source.nbar"] if nbar is None else nbar, v["source.pulse_rate_hz"], v["source.pulse_width_s"])

    def with_values(self, **updates) -> "RunConfig":
        """Copy with dotted keys given as keyword names using '__' for '.'."""
        vals = dict(self.values)
        for k, x in updates.items():
            name = k.replace("__", ".")
            if name not in _BY_NAME:
                raise ConfigError(f"unknown key {name!r}", key=name)
            vals[name] = x
        return validate(RunConfig(self.experiment, vals))


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    for key in SCHEMA:
        if key.check is not None:
            msg = key.check(cfg.values[key.name])
            if msg:
                raise ConfigError(f"{key.name} = {_fmt(cfg.values[key.name])} {msg}", key=key.name)
    try:
        cfg.channel_params()
        cfg.cavity()
        cfg.detector("a")
        cfg.detector("b")
        cfg.drive()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if len(cfg["acquisition.theta_grid_deg"]) < 4:
        raise ConfigError("acquisition.theta_grid_deg needs at least 4 angles", key="acquisition.theta_grid_deg")
    if not cfg["acquisition.nbar_grid"]:
        raise ConfigError("acquisition.nbar_grid is empty", key="acquisition.nbar_grid")
    return cfg


def parse_config(text: str, experiment: str = "budget") -> RunConfig:
    values = dict(DEFAULTS)
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, value = line.partition("=")
        name, value = name.strip(), value.strip()
        if not sep or not name:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        if name not in _BY_NAME:
            raise ConfigError(f"unknown key {name!r}", line=lineno, key=name)
        if name in seen:
            raise ConfigError(f"duplicate key {name!r} (first on line {seen[name]})", line=lineno, key=name)
        seen[name] = lineno
        try:
            values[name] = _BY_NAME[name].parse(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {name}: {exc}", line=lineno, key=name) from None
    return validate(RunConfig(experiment, values))


def print_defaults(cfg: RunConfig | None = None) -> str:
    values = DEFAULTS if cfg is None else cfg.values
    lines = ["# qfcbench run configuration (defaults reproduce the published device)"]
    section = None
    for key in SCHEMA:
        sec = key.name.split(".", 1)[0]
        if sec != section:
            lines.append("")
            lines.append(f"# [{sec}]")
            section = sec
        lines.append(f"# {key.comment}")
        lines.append(f"{key.name} = {_fmt(values[key.name])}")
    return "\n".join(lines) + "\n"


def preset_text(name: str) -> str:
    """Text of a shipped preset, e.g. preset_text("fringes")."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return files("qfcbench").joinpath("presets", f"{name}.cfg").read_text(encoding="utf-8")
