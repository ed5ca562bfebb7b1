"""Inverse problems on count records: tomography, fringe fitting, fidelity ledger."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .counts import CountRecord, derive_seed, make_rng, worker_count
from .polopt import projector_for, six_settings
from .qstate import fidelity, purity, stokes_to_rho


class InsufficientDataError(ValueError):
    pass


class IllPosedFitError(ArithmeticError):
    pass


class InconsistentBudgetError(ValueError):
    pass


class UnstableEstimateError(RuntimeError):
    pass


@dataclass(frozen=True)
class TomographyResult:
    rho_hat: np.ndarray
    fidelity_to_target: Optional[float]
    purity: float
    log_likelihood: float
    iterations: int
    converged: bool = True
    bootstrap_sigma: Optional[float] = None
    loglik_history: tuple[float, ...] = field(default=(), repr=False, compare=False)


@dataclass(frozen=True)
class FringeFit:
    offset_a: float
    cos_b: float
    sin_c: float
    visibility: float
    phase_deg: float
    rms_residual: float
    visibility_sigma: float
    clamped: bool = False


@dataclass(frozen=True)
class FidelityBudget:
    f_initial: float
    f_net: float
    f_raw: float
    contributions: tuple[tuple[str, float], ...]
    f_trans: float
    f_trans_optimal: float

    @property
    def total_drop(self) -> float:
        return self.f_initial - self.f_raw


class LinearEstimate(NamedTuple):
    rho: np.ndarray
    physical: bool


# -- tomography --------------------------------------------------------------

def _six_counts(records: Sequence[CountRecord]) -> np.ndarray:
    if len(records) != 6:
        raise InsufficientDataError(f"expected 6 records in H, V, D, A, R, L order, got {len(records)}")
    return np.array([r.singles_a for r in records], dtype=float)


def linear_inversion(records: Sequence[CountRecord]) -> LinearEstimate:
    """Stokes reconstruction from the H/V, D/A and R/L count pairs."""
    n = _six_counts(records)
    pairs = n.reshape(3, 2)
    totals = pairs.sum(axis=1)
    if np.any(totals <= 0):
        raise InsufficientDataError("a basis pair has zero total counts")
    s_hv, s_da, s_rl = (pairs[:, 0] - pairs[:, 1]) / totals
    rho = stokes_to_rho(s_da, s_rl, s_hv)
    return LinearEstimate(rho, bool(np.linalg.eigvalsh(rho)[0] >= 0))


def psd_project(rho: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and renormalize the trace."""
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    out = (v * w) @ v.conj().T
    return out / np.trace(out).real


def _probs(rho: np.ndarray, projectors: np.ndarray) -> np.ndarray:
    return np.einsum("kij,ji->k", projectors, rho).real


def _loglik(n: np.ndarray, p: np.ndarray) -> float:
    mask = n > 0
    if np.any(p[mask] <= 0):
        return -math.inf
    return float(np.sum(n[mask] * np.log(p[mask])))


def mle_reconstruct(
    records: Sequence[CountRecord],
    seed_state: Optional[np.ndarray] = None,
    max_iter: int = 10_000,
    tol: float = 1e-13,
    target: Optional[np.ndarray] = None,
) -> TomographyResult:
    """Maximum-likelihood qubit state by the damped R rho R iteration.

    Each step proposes R rho R / Tr with R = sum_i (f_i / p_i) P_i. A
    proposal that lowers the likelihood is replaced by the diluted
    operator (I + eps R)/(1 + eps) with eps halved until the likelihood
    rises; when no eps works the current state is a fixed point. Stops
    when the per-count log-likelihood gain drops below `tol`.
    """
    n = _six_counts(records)
    total = n.sum()
    if total <= 0:
        raise InsufficientDataError("no counts")
    f = n / total
    projectors = np.array([projector_for(s) for s in six_settings()])

    rho = psd_project(linear_inversion(records).rho) if seed_state is None else np.asarray(seed_state, dtype=complex)
    if _loglik(n, _probs(rho, projectors)) == -math.inf:
        rho = (1 - 1e-6) * rho + 1e-6 * np.eye(2) / 2

    ll = _loglik(n, _probs(rho, projectors))
    history = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = _probs(rho, projectors)
        weights = np.divide(f, p, out=np.zeros_like(f), where=f > 0)
        r = np.einsum("k,kij->ij", weights, projectors)
        eps = math.inf
        while True:
            step = r if eps == math.inf else (np.eye(2) + eps * r) / (1 + eps)
            cand = step @ rho @ step
            cand = 0.5 * (cand + cand.conj().T)
            cand /= np.trace(cand).real
            ll_new = _loglik(n, _probs(cand, projectors))
            if ll_new >= ll:
                break
            eps = 1.0 if eps == math.inf else eps / 2
            if eps < 1e-12:
                cand, ll_new = rho, ll
                break
        gain = (ll_new - ll) / total
        rho, ll = cand, ll_new
        history.append(ll)
        if gain < tol:
            converged = True
            break

    fid = None if target is None else fidelity(rho, target)
    return TomographyResult(
        rho_hat=rho,
        fidelity_to_target=fid,
        purity=purity(rho),
        log_likelihood=ll,
        iterations=it,
        converged=converged,
        loglik_history=tuple(history),
    )


# -- fringes -----------------------------------------------------------------

def fringe_fit(points: Sequence[tuple[float, float]], variances: Optional[Sequence[float]] = None) -> FringeFit:
    """Weighted linear least squares of C(t) = a + b cos 4t + c sin 4t.

    Default weights are Poisson, 1/max(C, 1). Visibility is sqrt(b^2 + c^2)/a;
    values above 1 are clamped and flagged.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 4:
        raise IllPosedFitError("fringe fit needs at least 4 points")
    theta = np.deg2rad(pts[:, 0])
    y = pts[:, 1]
    if len(np.unique(np.round(pts[:, 0] % 90.0, 9))) < 3:
        raise IllPosedFitError("angles alias to fewer than 3 distinct values modulo 90 deg")
    var = np.maximum(y, 1.0) if variances is None else np.maximum(np.asarray(variances, float), 1e-300)
    x = np.column_stack([np.ones_like(theta), np.cos(4 * theta), np.sin(4 * theta)])
    w = 1.0 / var
    xtwx = x.T @ (x * w[:, None])
    if np.linalg.cond(xtwx) > 1e12:
        raise IllPosedFitError("singular fringe design matrix")
    cov = np.linalg.inv(xtwx)
    a, b, c = cov @ (x.T @ (w * y))
    if a <= 0:
        raise IllPosedFitError("non-positive fringe offset")
    amp = math.hypot(b, c)
    vis = amp / a
    # gradient of sqrt(b^2+c^2)/a
    if amp > 0:
        grad = np.array([-amp / a**2, b / (amp * a), c / (amp * a)])
        sigma = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    else:
        sigma = float(math.sqrt(cov[1, 1] + cov[2, 2]) / a)
    resid = y - x @ np.array([a, b, c])
    clamped = vis > 1.0
    return FringeFit(
        offset_a=float(a),
        cos_b=float(b),
        sin_c=float(c),
        visibility=float(min(vis, 1.0)),
        phase_deg=float(np.rad2deg(math.atan2(c, b)) / 4),
        rms_residual=float(math.sqrt(np.mean(resid**2))),
        visibility_sigma=sigma,
        clamped=bool(clamped),
    )


def net_fringe_points(records: Sequence[CountRecord], background: Optional[CountRecord] = None):
    """(theta, coincidences minus scaled background) plus Poisson variances."""
    pts, var = [], []
    bg_rate = 0.0 if background is None else background.coincidences / background.integration_s
    bg_var_rate = 0.0 if background is None else background.coincidences / background.integration_s**2
    for r in records:
        if r.coincidences is None or r.theta_deg is None:
            raise InsufficientDataError(f"record {r.setting_id!r} has no coincidences or angle")
        pts.append((r.theta_deg, r.coincidences - bg_rate * r.integration_s))
        var.append(max(r.coincidences, 1) + bg_var_rate * r.integration_s**2)
    return pts, var


def fidelity_from_visibility(v_list: Sequence[float]) -> float:
    """Bell-state fidelity estimate (mean(V) + 1)/2."""
    v = list(v_list)
    if not v:
        raise ValueError("no visibilities given")
    if any(not 0.0 <= x <= 1.0 for x in v):
        raise ValueError("visibilities must lie in [0, 1]")
    return (math.fsum(v) / len(v) + 1) / 2


def budget(f_initial: float, f_net: float, noise_drops: Sequence[tuple[str, float]]) -> FidelityBudget:
    """Additive fidelity ledger: alignment = f_initial - f_net, then each noise drop.

    The optimal transfer fidelity keeps only the drop labelled 'raman'.
    """
    if f_net > f_initial:
        raise InconsistentBudgetError("f_net exceeds f_initial")
    drops = [(str(k), float(d)) for k, d in noise_drops]
    if any(d < 0 for _, d in drops):
        raise InconsistentBudgetError("negative fidelity drop")
    f_raw = f_net - math.fsum(d for _, d in drops)
    if f_raw < 0:
        raise InconsistentBudgetError(f"raw fidelity {f_raw:.6g} is negative")
    raman = math.fsum(d for k, d in drops if k == "raman")
    return FidelityBudget(
        f_initial=f_initial,
        f_net=f_net,
        f_raw=f_raw,
        contributions=(("alignment", f_initial - f_net), *drops),
        f_trans=f_raw / f_initial,
        f_trans_optimal=(f_initial - raman) / f_initial,
    )


# -- SNR ---------------------------------------------------------------------

def snr_points(records: Sequence[CountRecord], nbar: Sequence[float]) -> np.ndarray:
    """(nbar, SNR) rows from signal-on / signal-blocked record pairs."""
    rows = []
    for r, x in zip(records, nbar):
        if not r.singles_b:
            raise InsufficientDataError(f"record {r.setting_id!r} has no noise counts")
        rows.append((x, (r.singles_a - r.singles_b) / r.singles_b))
    return np.array(rows)


def fit_through_origin(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of y = k x and the centred coefficient of determination."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    k = float(x @ y / (x @ x))
    ss_res = float(np.sum((y - k * x) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return k, 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


# -- bootstrap ---------------------------------------------------------------

def _resample(record: CountRecord, rng: np.random.Generator) -> CountRecord:
    c = None if record.coincidences is None else int(rng.poisson(record.coincidences))
    base = c or 0
    old_c = record.coincidences or 0
    sa = base + int(rng.poisson(record.singles_a - old_c))
    sb = None if record.singles_b is None else base + int(rng.poisson(record.singles_b - old_c))
    return replace(record, singles_a=sa, singles_b=sb, coincidences=c)


def bootstrap_sigma(
    records: Sequence[CountRecord],
    estimator: Callable[[list[CountRecord]], float],
    n_resamples: int = 500,
    seed: int = 0,
    workers: Optional[int] = None,
) -> float:
    """Parametric Poisson bootstrap standard deviation of a scalar estimator.

    Resamples that make the estimator raise are dropped; more than 10%
    failures raise UnstableEstimateError.
    """
    if n_resamples < 100:
        raise ValueError("n_resamples must be >= 100")
    recs = list(records)

    def one(i: int) -> Optional[float]:
        rng = make_rng(derive_seed(seed, i))
        sample = [_resample(r, rng) for r in recs]
        try:
            return float(estimator(sample))
        except (ArithmeticError, ValueError):
            return None

    w = min(worker_count(workers), n_resamples)
    if w <= 1:
        values = [one(i) for i in range(n_resamples)]
    else:
        with ThreadPoolExecutor(max_workers=w) as pool:
            values = list(pool.map(one, range(n_resamples)))
    good = [v for v in values if v is not None]
    failed = n_resamples - len(good)
    if failed > 0.1 * n_resamples:
        raise UnstableEstimateError(f"{failed}/{n_resamples} bootstrap resamples failed")
    return float(np.std(good, ddof=1))
