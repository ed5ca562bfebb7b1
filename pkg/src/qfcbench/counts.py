"""Photon-counting statistics and seeded Monte Carlo count records.

Every record draws from its own PCG64 generator seeded with a sub-seed
derived from (master seed, experiment tag, point index) via
numpy's SeedSequence, so results do not depend on scheduling order or
worker count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .channel import ChannelParams, apply_channel_one_qubit, apply_channel_to_pair, device_efficiency
from .polopt import MeasurementSetting, projector_for, six_settings
from .qstate import BASIS_LABELS, partial_trace, werner_state


@dataclass(frozen=True)
class DetectorParams:
    efficiency: float = 0.5
    dark_rate_hz: float = 0.0
    window_s: float = 1e-9

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"detector efficiency {self.efficiency!r} outside [0, 1]")
        if self.dark_rate_hz < 0:
            raise ValueError("dark_rate_hz must be >= 0")
        if self.window_s <= 0:
            raise ValueError("window_s must be > 0")


@dataclass(frozen=True)
class SourceDrive:
    mean_photons_per_pulse: float
    pulse_rate_hz: float
    pulse_width_s: float = 10e-9

    def __post_init__(self):
        if self.mean_photons_per_pulse < 0:
            raise ValueError("mean_photons_per_pulse must be >= 0")
        if self.pulse_rate_hz <= 0 or self.pulse_width_s <= 0:
            raise ValueError("pulse rate and width must be > 0")


@dataclass(frozen=True)
class CountRecord:
    setting_id: str
    singles_a: int
    integration_s: float
    seed: int
    singles_b: Optional[int] = None
    coincidences: Optional[int] = None
    theta_deg: Optional[float] = None

    def __post_init__(self):
        for name in ("singles_a", "singles_b", "coincidences"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} is negative")
        if self.coincidences is not None:
            limit = self.singles_a if self.singles_b is None else min(self.singles_a, self.singles_b)
            if self.coincidences > limit:
                raise ValueError("coincidences exceed singles")


@dataclass(frozen=True)
class ExpectedRates:
    """Mean rates (Hz) for one measurement setting."""

    setting_id: str
    singles_a: float
    singles_b: Optional[float] = None
    coincidences: Optional[float] = None
    theta_deg: Optional[float] = None


# -- seeding -----------------------------------------------------------------

def derive_seed(master: int, *keys: int) -> int:
    """Deterministic 32-bit sub-seed for (master, *keys)."""
    return int(np.random.SeedSequence([int(master), *map(int, keys)]).generate_state(1)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def worker_count(requested: Optional[int] = None) -> int:
    """Worker cap from the argument or QFCBENCH_THREADS (0 = auto)."""
    n = requested if requested is not None else int(os.environ.get("QFCBENCH_THREADS", "0") or 0)
    return n if n > 0 else (os.cpu_count() or 1)


def _parallel_map(fn: Callable[[int], CountRecord], n: int, workers: Optional[int]) -> list[CountRecord]:
    w = min(worker_count(workers), n)
    if w <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, range(n)))


# -- rates -------------------------------------------------------------------

def signal_rate(drive: SourceDrive, channel_eta: float, det: DetectorParams, duty: float) -> float:
    if not 0.0 < duty <= 1.0:
        raise ValueError(f"duty {duty!r} outside (0, 1]")
    return drive.mean_photons_per_pulse * drive.pulse_rate_hz * channel_eta * det.efficiency * duty


def gated_dark_rate(drive: SourceDrive, det: DetectorParams) -> float:
    """Dark counts falling inside the per-pulse detection gate."""
    return det.dark_rate_hz * det.window_s * drive.pulse_rate_hz


def expected_single_rate(drive: SourceDrive, channel_eta: float, det: DetectorParams, duty: float) -> float:
    return signal_rate(drive, channel_eta, det, duty) + gated_dark_rate(drive, det)


def noise_count_rate(drive: SourceDrive, noise_rate_hz: float, det: DetectorParams, duty: float) -> float:
    """In-gate background: photonic noise during usable time plus gated dark counts."""
    return noise_rate_hz * duty + gated_dark_rate(drive, det)


def snr(drive: SourceDrive, noise_rate_hz: float, channel_eta: float, det: DetectorParams, duty: float) -> float:
    """Signal counts over noise counts in the same gates; math.inf when there is no noise."""
    noise = noise_count_rate(drive, noise_rate_hz, det, duty)
    sig = signal_rate(drive, channel_eta, det, duty)
    if noise == 0:
        return math.inf
    return sig / noise


def noise_rate_for_snr_slope(slope: float, drive: SourceDrive, channel_eta: float, det: DetectorParams, duty: float) -> float:
    """Photonic noise rate giving SNR = slope * nbar (dark counts held fixed)."""
    unit = SourceDrive(1.0, drive.pulse_rate_hz, drive.pulse_width_s)
    needed = signal_rate(unit, channel_eta, det, duty) / slope - gated_dark_rate(unit, det)
    if needed < 0:
        raise ValueError("dark counts alone already exceed the noise budget for this slope")
    return needed / duty


def accidental_rate(singles_a_hz: float, singles_b_hz: float, window_s: float) -> float:
    return singles_a_hz * singles_b_hz * window_s


def expected_coincidence_rate(
    rho: np.ndarray,
    pair_rate_hz: float,
    proj_a: np.ndarray,
    proj_b: np.ndarray,
    det_a: DetectorParams,
    det_b: DetectorParams,
    channel_eta: float,
    duty: float,
) -> tuple[float, float]:
    """(true, accidental) coincidence rates; photon b is the converted one."""
    rho = np.asarray(rho, dtype=complex)
    p_joint = float(np.trace(np.kron(proj_a, proj_b) @ rho).real)
    true = pair_rate_hz * p_joint * channel_eta * det_a.efficiency * det_b.efficiency * duty
    sa, sb = _pair_singles(rho, pair_rate_hz, proj_a, proj_b, det_a, det_b, channel_eta, duty)
    window = max(det_a.window_s, det_b.window_s)
    return true, accidental_rate(sa, sb, window)


def _pair_singles(rho, pair_rate_hz, proj_a, proj_b, det_a, det_b, channel_eta, duty):
    pa = float(np.trace(proj_a @ partial_trace(rho, keep=0)).real)
    pb = float(np.trace(proj_b @ partial_trace(rho, keep=1)).real)
    sa = pair_rate_hz * pa * det_a.efficiency + det_a.dark_rate_hz
    sb = pair_rate_hz * pb * channel_eta * det_b.efficiency * duty + det_b.dark_rate_hz
    return sa, sb


# -- sampling ----------------------------------------------------------------

def sample_record(expected: ExpectedRates, integration_s: float, seed: int) -> CountRecord:
    """Poisson realization of `expected` over `integration_s`.

    Coincidences are drawn first and each singles count adds an
    independent Poisson excess, so coincidences never exceed singles.
    """
    if integration_s <= 0:
        raise ValueError("integration_s must be > 0")
    rng = make_rng(seed)
    t = integration_s
    coinc = None
    floor = 0
    if expected.coincidences is not None:
        coinc = int(rng.poisson(expected.coincidences * t))
        floor = coinc
    sa = floor + int(rng.poisson(max(expected.singles_a - (expected.coincidences or 0.0), 0.0) * t))
    sb = None
    if expected.singles_b is not None:
        sb = floor + int(rng.poisson(max(expected.singles_b - (expected.coincidences or 0.0), 0.0) * t))
    return CountRecord(
        setting_id=expected.setting_id,
        singles_a=sa,
        singles_b=sb,
        coincidences=coinc,
        integration_s=t,
        seed=seed,
        theta_deg=expected.theta_deg,
    )


def _jitter_averaged(apply: Callable, rho: np.ndarray, channel: ChannelParams, rng: np.random.Generator, draws: int):
    """Average the channel output over `draws` independent phase samples."""
    if channel.phase_jitter_rad == 0 or draws <= 0:
        return apply(rho, channel, None)
    outs = [apply(rho, channel, rng) for _ in range(draws)]
    return sum(o[0] for o in outs) / draws, float(np.mean([o[1] for o in outs]))


_FRINGE_TAG = 1
_TOMO_TAG = 2
_SNR_TAG = 3
_BACKGROUND_TAG = 4


def simulate_fringe_scan(
    f_initial: float,
    channel: ChannelParams,
    settings: Sequence[tuple[MeasurementSetting, MeasurementSetting]],
    pair_rate_hz: float,
    det_a: DetectorParams,
    det_b: DetectorParams,
    integration_s: float,
    seed: int,
    *,
    duty: float = 1.0,
    noise_coincidence_hz: Optional[float] = 0.02,
    jitter_draws: int = 32,
    workers: Optional[int] = None,
    tag: str = "",
) -> list[CountRecord]:
    """One coincidence record per fringe setting, from a Werner source with photon b converted.

    Noise coincidences are the flat gated rate `noise_coincidence_hz`, or
    the singles-product accidental formula when it is None.
    """
    source = werner_state(f_initial)
    eta = device_efficiency(channel)

    def point(i: int) -> CountRecord:
        sub = derive_seed(seed, _FRINGE_TAG, i)
        rng = make_rng(sub)
        rho, prob = _jitter_averaged(
            lambda r, c, g: apply_channel_to_pair(r, c, "second", g), source, channel, rng, jitter_draws
        )
        eta_eff = eta * prob / channel.success_efficiency
        pa, pb = projector_for(settings[i][0]), projector_for(settings[i][1])
        true, acc = expected_coincidence_rate(rho, pair_rate_hz, pa, pb, det_a, det_b, eta_eff, duty)
        noise = acc if noise_coincidence_hz is None else noise_coincidence_hz
        sa, sb = _pair_singles(rho, pair_rate_hz, pa, pb, det_a, det_b, eta_eff, duty)
        theta = settings[i][0].hwp_deg
        exp = ExpectedRates(f"{tag}theta={theta:g}", sa, sb, true + noise, theta)
        return sample_record(exp, integration_s, derive_seed(sub, 0))

    return _parallel_map(point, len(settings), workers)


def simulate_pump_off(
    noise_coincidence_hz: float,
    det_a: DetectorParams,
    det_b: DetectorParams,
    integration_s: float,
    seed: int,
    setting_id: str = "pump-off",
) -> CountRecord:
    """Background-only record with the pump switched off: dark singles and noise coincidences."""
    exp = ExpectedRates(
        setting_id,
        det_a.dark_rate_hz + noise_coincidence_hz,
        det_b.dark_rate_hz + noise_coincidence_hz,
        noise_coincidence_hz,
    )
    return sample_record(exp, integration_s, derive_seed(seed, _BACKGROUND_TAG))


def simulate_tomography(
    rho_in: np.ndarray,
    channel: ChannelParams,
    shots_per_setting: float,
    seed: int,
    *,
    label: str = "",
    jitter_draws: int = 32,
    integration_s: float = 1.0,
    workers: Optional[int] = None,
) -> list[CountRecord]:
    """Six single-detector records, in six_settings order, after single-photon conversion.

    `shots_per_setting` is the expected number of detected photons for a
    projection with unit probability.
    """
    settings = six_settings()

    def point(i: int) -> CountRecord:
        sub = derive_seed(seed, _TOMO_TAG, i)
        rng = make_rng(sub)
        rho, _ = _jitter_averaged(apply_channel_one_qubit, rho_in, channel, rng, jitter_draws)
        p = float(np.trace(projector_for(settings[i]) @ rho).real)
        exp = ExpectedRates(f"{label}{BASIS_LABELS[i]}", max(p, 0.0) * shots_per_setting / integration_s)
        return sample_record(exp, integration_s, derive_seed(sub, 0))

    return _parallel_map(point, len(settings), workers)


def simulate_snr_sweep(
    nbar_grid: Sequence[float],
    drive: SourceDrive,
    channel_eta: float,
    det: DetectorParams,
    duty: float,
    noise_rate_hz: float,
    integration_s: float,
    seed: int,
    workers: Optional[int] = None,
) -> list[CountRecord]:
    """Gated singles per mean photon number.

    singles_a counts with the signal on; singles_b is a signal-blocked
    reference acquisition of equal length giving the noise counts.
    """

    def point(i: int) -> CountRecord:
        d = SourceDrive(float(nbar_grid[i]), drive.pulse_rate_hz, drive.pulse_width_s)
        noise = noise_count_rate(d, noise_rate_hz, det, duty)
        total = signal_rate(d, channel_eta, det, duty) + noise
        exp = ExpectedRates(f"nbar={d.mean_photons_per_pulse:g}", total, noise)
        return sample_record(exp, integration_s, derive_seed(seed, _SNR_TAG, i))

    return _parallel_map(point, len(nbar_grid), workers)
