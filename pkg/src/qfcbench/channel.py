"""The conversion interface as a quantum channel.

The dual-waveguide interferometer converts H in one arm and V in the
other, so the post-selected map on polarization is the diagonal operator
K = diag(sqrt(eta_h), e^{i phi} sqrt(eta_v)). Photonic background (Raman
anti-Stokes light, dark counts) is an unpolarized admixture on the
converted photon. Residual interferometer phase noise is a zero-mean
Gaussian jitter on phi: sampled per trial when an RNG is supplied,
otherwise applied as its exact ensemble average (dephasing by
exp(-sigma^2/2)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Optional

import numpy as np

from .qstate import (
    PAULI_Z,
    bell_phi_plus,
    check_density_matrix,
    fidelity,
    partial_trace,
    werner_state,
)

Slot = Literal["first", "second"]


class DegenerateChannelError(ArithmeticError):
    """The channel has zero success probability for the given input."""


PUBLISHED_LOSSES_DB = (("wdm", 3.0), ("path", 3.7), ("cavity", 1.1), ("fiber", 1.0))


@dataclass(frozen=True)
class ChannelParams:
    eta_h: float = 1.0
    eta_v: float = 1.0
    phase_rad: float = 0.0
    phase_jitter_rad: float = 0.0
    noise_admixture: float = 0.0
    loss_budget_db: tuple[tuple[str, float], ...] = ()
    internal_efficiency: float = 1.0

    def __post_init__(self):
        for name in ("eta_h", "eta_v", "noise_admixture", "internal_efficiency"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v!r} outside [0, 1]")
        if self.phase_jitter_rad < 0 or not math.isfinite(self.phase_jitter_rad):
            raise ValueError(f"phase_jitter_rad = {self.phase_jitter_rad!r} must be finite and >= 0")
        if not math.isfinite(self.phase_rad):
            raise ValueError("phase_rad must be finite")
        for label, db in self.loss_budget_db:
            if db < 0:
                raise ValueError(f"loss entry {label!r} = {db!r} dB is negative")
        object.__setattr__(self, "loss_budget_db", tuple((str(k), float(v)) for k, v in self.loss_budget_db))

    @property
    def success_efficiency(self) -> float:
        """Mean arm efficiency, the success probability for an unpolarized input."""
        return 0.5 * (self.eta_h + self.eta_v)


@dataclass(frozen=True)
class CavitySpec:
    fsr_ghz: float = 150.0
    bandwidth_mhz: float = 250.0
    conversion_band_ghz: float = 42.0
    # fraction of time taken by the reference-laser lock, not available to signal
    duty_cycle: float = 0.06

    def __post_init__(self):
        if min(self.fsr_ghz, self.bandwidth_mhz, self.conversion_band_ghz) <= 0:
            raise ValueError("cavity frequencies must be positive")
        if self.bandwidth_mhz / 1e3 >= self.fsr_ghz:
            raise ValueError("cavity bandwidth must be below the free spectral range")
        if self.fsr_ghz <= self.conversion_band_ghz:
            raise ValueError("free spectral range must exceed the conversion band (single transmission peak)")
        if not 0.0 < self.duty_cycle <= 1.0:
            raise ValueError(f"duty_cycle = {self.duty_cycle!r} outside (0, 1]")

    @property
    def usable_fraction(self) -> float:
        return 1.0 - self.duty_cycle


def conversion_map(params: ChannelParams, phase_rad: Optional[float] = None) -> np.ndarray:
    phi = params.phase_rad if phase_rad is None else phase_rad
    return np.diag([math.sqrt(params.eta_h), np.exp(1j * phi) * math.sqrt(params.eta_v)])


def dephasing_factor(jitter_rad: float) -> float:
    """E[exp(i x)] for x ~ N(0, jitter^2)."""
    return math.exp(-0.5 * jitter_rad**2)


def _draw_phase(params: ChannelParams, rng: Optional[np.random.Generator]) -> tuple[float, float]:
    """Return (phase to apply, residual coherence factor)."""
    if params.phase_jitter_rad == 0:
        return params.phase_rad, 1.0
    if rng is None:
        return params.phase_rad, dephasing_factor(params.phase_jitter_rad)
    return params.phase_rad + rng.normal(0.0, params.phase_jitter_rad), 1.0


def _dephase(rho: np.ndarray, lam: float, z: np.ndarray) -> np.ndarray:
    if lam == 1.0:
        return rho
    return 0.5 * (1 + lam) * rho + 0.5 * (1 - lam) * (z @ rho @ z)


def apply_channel_one_qubit(
    rho: np.ndarray, params: ChannelParams, rng: Optional[np.random.Generator] = None
) -> tuple[np.ndarray, float]:
    """Post-selected output state and success probability Tr(K rho K^dag)."""
    rho = check_density_matrix(rho)
    if rho.shape != (2, 2):
        raise ValueError("apply_channel_one_qubit expects a single-qubit state")
    phi, lam = _draw_phase(params, rng)
    k = conversion_map(params, phi)
    out = k @ rho @ k.conj().T
    prob = float(np.trace(out).real)
    if prob <= 0:
        raise DegenerateChannelError("zero conversion probability for this input")
    out = _dephase(out / prob, lam, PAULI_Z)
    p = params.noise_admixture
    out = (1 - p) * out + p * np.eye(2) / 2
    return out, prob


def apply_channel_to_pair(
    rho: np.ndarray,
    params: ChannelParams,
    which: Slot = "second",
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, float]:
    """Convert one photon of a pair; noise acts on the converted slot only."""
    rho = check_density_matrix(rho)
    if rho.shape != (4, 4):
        raise ValueError("apply_channel_to_pair expects a two-qubit state")
    eye = np.eye(2)
    phi, lam = _draw_phase(params, rng)
    k = conversion_map(params, phi)
    if which == "second":
        kk, z = np.kron(eye, k), np.kron(eye, PAULI_Z)
    elif which == "first":
        kk, z = np.kron(k, eye), np.kron(PAULI_Z, eye)
    else:
        raise ValueError(f"which must be 'first' or 'second', got {which!r}")
    out = kk @ rho @ kk.conj().T
    prob = float(np.trace(out).real)
    if prob <= 0:
        raise DegenerateChannelError("zero conversion probability for this input")
    out = _dephase(out / prob, lam, z)
    p = params.noise_admixture
    if p:
        if which == "second":
            noise = np.kron(partial_trace(out, keep=0), eye / 2)
        else:
            noise = np.kron(eye / 2, partial_trace(out, keep=1))
        out = (1 - p) * out + p * noise
    return out, prob


def total_loss_db(params: ChannelParams) -> float:
    return math.fsum(db for _, db in params.loss_budget_db)


def device_efficiency(params: ChannelParams) -> float:
    """Internal conversion efficiency attenuated by every loss-budget entry."""
    return params.internal_efficiency * 10 ** (-total_loss_db(params) / 10)


def without_loss(params: ChannelParams, label: str) -> ChannelParams:
    kept = tuple((k, v) for k, v in params.loss_budget_db if k != label)
    if len(kept) == len(params.loss_budget_db):
        raise KeyError(label)
    return replace(params, loss_budget_db=kept)


def raman_suppression(cavity: CavitySpec) -> float:
    """Flat-top ratio of conversion band to cavity linewidth (both in MHz)."""
    return cavity.conversion_band_ghz * 1e3 / cavity.bandwidth_mhz


def _bell_fidelity(rho: np.ndarray) -> float:
    return fidelity(rho, bell_phi_plus())


def _bisect(f, lo: float, hi: float, tol: float) -> float:
    """Root of an increasing function f on [lo, hi]."""
    flo = f(lo)
    if flo >= 0:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def calibrate_noise(target_drop: float, base: np.ndarray, which: Slot = "second", tol: float = 1e-9) -> float:
    """Unpolarized admixture on the converted photon that lowers Bell fidelity by `target_drop`.

    Fidelity is linear in the admixture p, F(p) = F0 - p (F0 - F_noise)
    where F_noise = <phi+|Tr_conv(rho) x I/2|phi+> = 1/4, so bisection
    and the closed form agree.
    """
    base = check_density_matrix(base)
    f0 = _bell_fidelity(base)
    full = apply_channel_to_pair(base, ChannelParams(noise_admixture=1.0), which)[0]
    max_drop = f0 - _bell_fidelity(full)
    if target_drop < 0 or target_drop > max_drop + 1e-12:
        raise ValueError(f"fidelity drop {target_drop!r} not achievable (max {max_drop:.6g})")
    if target_drop == 0:
        return 0.0

    def excess(p: float) -> float:
        out = apply_channel_to_pair(base, ChannelParams(noise_admixture=p), which)[0]
        return (f0 - _bell_fidelity(out)) - target_drop

    return _bisect(excess, 0.0, 1.0, tol)


def calibrate_phase_jitter(target_drop: float, base: np.ndarray, which: Slot = "second", tol: float = 1e-12) -> float:
    """Gaussian phase-jitter std (rad) whose ensemble average lowers Bell fidelity by `target_drop`."""
    base = check_density_matrix(base)
    f0 = _bell_fidelity(base)
    if target_drop == 0:
        return 0.0

    def drop(sigma: float) -> float:
        out = apply_channel_to_pair(base, ChannelParams(phase_jitter_rad=sigma), which)[0]
        return f0 - _bell_fidelity(out)

    hi = 50.0
    if target_drop < 0 or target_drop > drop(hi):
        raise ValueError(f"fidelity drop {target_drop!r} not achievable by phase jitter")
    return _bisect(lambda s: drop(s) - target_drop, 0.0, hi, tol)


def combine_admixtures(*ps: float) -> float:
    """Successive unpolarized admixtures on the same photon compose to 1 - prod(1 - p)."""
    keep = 1.0
    for p in ps:
        keep *= 1.0 - p
    return 1.0 - keep


@dataclass(frozen=True)
class BudgetCalibration:
    """State-level channel parameters that reproduce a fidelity-drop ledger.

    Starting from a Werner source, the alignment drop is split between
    phase jitter (`phase_fraction`) and an unpolarized misalignment
    admixture; the noise drops are unpolarized admixtures, applied in
    order. Every drop is exact in Bell fidelity.
    """

    f_initial: float
    phase_jitter_rad: float
    misalignment_admixture: float
    noise_admixtures: dict[str, float] = field(default_factory=dict)
    fidelity_chain: tuple[tuple[str, float], ...] = ()

    def admixture(self, include_noise: bool = True, exclude: tuple[str, ...] = ()) -> float:
        ps = [self.misalignment_admixture]
        if include_noise:
            ps += [v for k, v in self.noise_admixtures.items() if k not in exclude]
        return combine_admixtures(*ps)

    def channel(self, base: ChannelParams, include_noise: bool = True, exclude: tuple[str, ...] = ()) -> ChannelParams:
        return replace(
            base,
            phase_jitter_rad=self.phase_jitter_rad,
            noise_admixture=self.admixture(include_noise, exclude),
        )


def calibrate_budget(
    f_initial: float,
    alignment_drop: float,
    noise_drops: dict[str, float],
    phase_fraction: float = 0.25,
) -> BudgetCalibration:
    if not 0.0 <= phase_fraction <= 1.0:
        raise ValueError(f"phase_fraction = {phase_fraction!r} outside [0, 1]")
    state = werner_state(f_initial)
    chain = [("source", _bell_fidelity(state))]

    sigma = calibrate_phase_jitter(phase_fraction * alignment_drop, state)
    state = apply_channel_to_pair(state, ChannelParams(phase_jitter_rad=sigma))[0]
    q_align = calibrate_noise((1 - phase_fraction) * alignment_drop, state)
    state = apply_channel_to_pair(state, ChannelParams(noise_admixture=q_align))[0]
    chain.append(("alignment", _bell_fidelity(state)))

    noise = {}
    for label, drop in noise_drops.items():
        q = calibrate_noise(drop, state)
        state = apply_channel_to_pair(state, ChannelParams(noise_admixture=q))[0]
        noise[label] = q
        chain.append((label, _bell_fidelity(state)))
    return BudgetCalibration(f_initial, sigma, q_align, noise, tuple(chain))
