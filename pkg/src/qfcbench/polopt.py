"""Jones-calculus waveplates, PBS projections and the analysis settings.

Angles are fast-axis angles from horizontal, in degrees at the API and
radians internally. Light passes the optional QWP first, then the HWP,
then the PBS; the transmitted port passes H, the reflected port V.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

HALF = "half"
QUARTER = "quarter"
TRANSMIT = "transmit"
REFLECT = "reflect"

_PORTS = {
    TRANSMIT: np.array([[1, 0], [0, 0]], dtype=complex),
    REFLECT: np.array([[0, 0], [0, 1]], dtype=complex),
}


def _norm_angle(deg: float) -> float:
    a = float(deg) % 180.0
    return 0.0 if a == 180.0 else a


@dataclass(frozen=True)
class WaveplateSetting:
    kind: Literal["half", "quarter"]
    angle_deg: float

    def __post_init__(self):
        if self.kind not in (HALF, QUARTER):
            raise ValueError(f"unknown waveplate kind {self.kind!r}")
        if not np.isfinite(self.angle_deg):
            raise ValueError("waveplate angle must be finite")
        object.__setattr__(self, "angle_deg", _norm_angle(self.angle_deg))


@dataclass(frozen=True)
class MeasurementSetting:
    hwp_deg: float
    port: Literal["transmit", "reflect"] = TRANSMIT
    qwp_deg: Optional[float] = None

    def __post_init__(self):
        if self.port not in _PORTS:
            raise ValueError(f"unknown PBS port {self.port!r}")
        if not np.isfinite(self.hwp_deg) or (self.qwp_deg is not None and not np.isfinite(self.qwp_deg)):
            raise ValueError("measurement angles must be finite")


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def waveplate_operator(s: WaveplateSetting) -> np.ndarray:
    """Jones matrix of an ideal waveplate.

    HWP(t) = [[cos 2t, sin 2t], [sin 2t, -cos 2t]]. QWP(t) = R(t) diag(1, i) R(-t),
    the sign chosen so that QWP(45 deg) maps |R> = (|H> + i|V>)/sqrt(2) onto |H>.
    """
    t = np.deg2rad(s.angle_deg)
    if s.kind == HALF:
        c, sn = np.cos(2 * t), np.sin(2 * t)
        return np.array([[c, sn], [sn, -c]], dtype=complex)
    return _rotation(t) @ np.diag([1, 1j]) @ _rotation(-t)


def analyzer_operator(m: MeasurementSetting) -> np.ndarray:
    w = waveplate_operator(WaveplateSetting(HALF, m.hwp_deg))
    if m.qwp_deg is not None:
        w = w @ waveplate_operator(WaveplateSetting(QUARTER, m.qwp_deg))
    return w


def projector_for(m: MeasurementSetting) -> np.ndarray:
    """Rank-1 projector W^dag P_port W selected by an analysis setting."""
    w = analyzer_operator(m)
    return w.conj().T @ _PORTS[m.port] @ w


def six_settings() -> list[MeasurementSetting]:
    """Settings projecting onto H, V, D, A, R, L (in that order), all on the transmit port."""
    return [
        MeasurementSetting(hwp_deg=0.0),
        MeasurementSetting(hwp_deg=45.0),
        MeasurementSetting(hwp_deg=22.5),
        MeasurementSetting(hwp_deg=-22.5),
        MeasurementSetting(hwp_deg=0.0, qwp_deg=45.0),
        MeasurementSetting(hwp_deg=45.0, qwp_deg=45.0),
    ]


_ANALYZERS = {"H": 0.0, "D": 22.5}


def fringe_settings(analyzer: str, theta_grid_deg: Sequence[float]) -> list[tuple[MeasurementSetting, MeasurementSetting]]:
    """Two-arm settings for a coincidence fringe scan.

    Each pair is (unconverted arm, converted arm), matching qubit order
    (first, second). The unconverted HWP sweeps the grid; the converted
    arm stays projected onto H or D.
    """
    if analyzer not in _ANALYZERS:
        raise ValueError(f"analyzer must be 'H' or 'D', got {analyzer!r}")
    grid = list(theta_grid_deg)
    if not grid:
        raise ValueError("theta grid is empty")
    fixed = MeasurementSetting(hwp_deg=_ANALYZERS[analyzer])
    return [(MeasurementSetting(hwp_deg=float(t)), fixed) for t in grid]


def joint_projector(pair: tuple[MeasurementSetting, MeasurementSetting]) -> np.ndarray:
    return np.kron(projector_for(pair[0]), projector_for(pair[1]))
