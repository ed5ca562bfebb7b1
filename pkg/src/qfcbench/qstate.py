"""Quantum-state primitives for one and two polarization qubits.

States are plain numpy arrays: kets are 1-D complex vectors, density
matrices and operators are square complex arrays. Basis ordering is
(H, V) for one qubit and (HH, HV, VH, VV) for two.
"""
from __future__ import annotations

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
EIGEN_FLOOR = -1e-9
NORM_TOL = 1e-10

_S = 1 / np.sqrt(2)

_BASIS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_S, _S], dtype=complex),
    "A": np.array([_S, -_S], dtype=complex),
    "R": np.array([_S, 1j * _S], dtype=complex),
    "L": np.array([_S, -1j * _S], dtype=complex),
}

BASIS_LABELS = ("H", "V", "D", "A", "R", "L")

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class StateError(ValueError):
    """Raised for malformed or unphysical states and operators."""


def _check_dim(dim: int) -> None:
    if dim not in (2, 4):
        raise StateError(f"unsupported dimension {dim}; expected 2 or 4")


def basis_state(label: str) -> np.ndarray:
    """Jones vector of one of the six polarization basis states H, V, D, A, R, L."""
    try:
        return _BASIS[label].copy()
    except KeyError:
        raise StateError(f"unknown basis label {label!r}") from None


def bell_phi_plus() -> np.ndarray:
    """(|HH> + |VV>)/sqrt(2)."""
    return np.array([_S, 0, 0, _S], dtype=complex)


def check_pure(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise StateError("pure state must be a 1-D amplitude vector")
    _check_dim(psi.shape[0])
    norm = np.vdot(psi, psi).real
    if abs(norm - 1) > NORM_TOL:
        raise StateError(f"state not normalized (norm^2 = {norm!r})")
    return psi


def eigvalsh(mat: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian 2x2 or 4x4 matrix."""
    mat = np.asarray(mat, dtype=complex)
    if mat.shape == (2, 2):
        # closed form: mean +/- sqrt(((a-d)/2)^2 + |b|^2)
        a, d = mat[0, 0].real, mat[1, 1].real
        b = mat[0, 1]
        mean = (a + d) / 2
        rad = np.hypot((a - d) / 2, abs(b))
        return np.array([mean - rad, mean + rad])
    return np.linalg.eigvalsh(mat)


def check_density_matrix(rho: np.ndarray) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity; return rho as complex array."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise StateError(f"density matrix must be square, got shape {rho.shape}")
    _check_dim(rho.shape[0])
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise StateError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1) > TRACE_TOL:
        raise StateError(f"density matrix trace {tr.real!r} != 1")
    if eigvalsh(rho)[0] < EIGEN_FLOOR:
        raise StateError("density matrix has negative eigenvalues")
    return rho


def dm_from_pure(psi: np.ndarray) -> np.ndarray:
    psi = check_pure(psi)
    return np.outer(psi, psi.conj())


def maximally_mixed(dim: int) -> np.ndarray:
    _check_dim(dim)
    return np.eye(dim, dtype=complex) / dim


def werner_state(f_initial: float) -> np.ndarray:
    """Isotropic mixture p|phi+><phi+| + (1-p) I/4 whose Bell fidelity is `f_initial`.

    p = (4F - 1)/3, so F = 1/4 gives the maximally mixed state.
    """
    if not 0.25 <= f_initial <= 1:
        raise StateError(f"Werner fidelity {f_initial!r} outside [0.25, 1]")
    p = (4 * f_initial - 1) / 3
    return p * dm_from_pure(bell_phi_plus()) + (1 - p) * maximally_mixed(4)


def fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    """Overlap <psi|rho|psi> with a pure target."""
    rho = np.asarray(rho, dtype=complex)
    psi = check_pure(psi)
    if rho.shape != (psi.shape[0], psi.shape[0]):
        raise StateError(f"dimension mismatch: rho {rho.shape} vs psi {psi.shape}")
    return float(np.vdot(psi, rho @ psi).real)


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho, dtype=complex)
    # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(rho) ** 2))


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != (2, 2) or b.shape != (2, 2):
        raise StateError("tensor expects two 2x2 operands")
    return np.kron(a, b)


def partial_trace(rho: np.ndarray, keep: int) -> np.ndarray:
    """Reduce a two-qubit operator to qubit `keep` (0 = first, 1 = second)."""
    r = np.asarray(rho, dtype=complex).reshape(2, 2, 2, 2)
    if keep == 0:
        return np.einsum("ijkj->ik", r)
    if keep == 1:
        return np.einsum("jijk->ik", r)
    raise StateError(f"keep must be 0 or 1, got {keep!r}")


def born_probability(rho: np.ndarray, effect: np.ndarray) -> float:
    """Tr(E rho) for a measurement effect 0 <= E <= I."""
    effect = np.asarray(effect, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if effect.shape != rho.shape:
        raise StateError(f"dimension mismatch: effect {effect.shape} vs rho {rho.shape}")
    if np.max(np.abs(effect - effect.conj().T)) > HERMITIAN_TOL:
        raise StateError("effect is not Hermitian")
    ev = eigvalsh(effect)
    if ev[0] < EIGEN_FLOOR or ev[-1] > 1 - EIGEN_FLOOR:
        raise StateError("effect eigenvalues outside [0, 1]")
    return float(np.trace(effect @ rho).real)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    diff = np.asarray(rho, dtype=complex) - np.asarray(sigma, dtype=complex)
    return float(0.5 * np.sum(np.abs(eigvalsh(diff))))


def stokes_to_rho(s1: float, s2: float, s3: float) -> np.ndarray:
    """(I + s1 X + s2 Y + s3 Z)/2 with X <-> D/A, Y <-> R/L, Z <-> H/V."""
    return 0.5 * (np.eye(2) + s1 * PAULI_X + s2 * PAULI_Y + s3 * PAULI_Z)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Hilbert-Schmidt (Ginibre) random state; rank=1 gives a Haar-random pure state."""
    _check_dim(dim)
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
