import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfcbench.qstate import (
    StateError,
    basis_state,
    bell_phi_plus,
    born_probability,
    check_density_matrix,
    dm_from_pure,
    fidelity,
    maximally_mixed,
    partial_trace,
    purity,
    random_density_matrix,
    tensor,
    werner_state,
)

S = 1 / math.sqrt(2)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_basis_h_and_d():
    np.testing.assert_allclose(basis_state("H"), [1, 0])
    np.testing.assert_allclose(basis_state("D"), [S, S])
    np.testing.assert_allclose(basis_state("A"), [S, -S])
    np.testing.assert_allclose(basis_state("R"), [S, 1j * S])
    np.testing.assert_allclose(basis_state("L"), [S, -1j * S])


def test_circular_states_orthogonal():
    assert abs(np.vdot(basis_state("R"), basis_state("L"))) < 1e-15


def test_basis_rejects_unknown_label():
    with pytest.raises(StateError):
        basis_state("X")


def test_basis_global_phase_first_amplitude_real_positive():
    for label in "HVDARL":
        psi = basis_state(label)
        first = psi[np.flatnonzero(np.abs(psi) > 0)[0]]
        assert first.imag == 0 and first.real > 0


def test_bell_state():
    psi = bell_phi_plus()
    np.testing.assert_allclose(psi, [S, 0, 0, S])
    assert abs(np.vdot(psi, psi) - 1) < 1e-15
    rho = dm_from_pure(psi)
    for keep in (0, 1):
        np.testing.assert_allclose(partial_trace(rho, keep), np.eye(2) / 2, atol=1e-10)


def test_dm_from_pure_examples():
    np.testing.assert_allclose(dm_from_pure(basis_state("H")), np.diag([1, 0]))
    np.testing.assert_allclose(dm_from_pure(basis_state("D")), np.full((2, 2), 0.5), atol=1e-15)
    # outer product written out for the Bell state: only the four corners are 1/2
    expected = np.zeros((4, 4))
    for i in (0, 3):
        for j in (0, 3):
            expected[i, j] = 0.5
    np.testing.assert_allclose(dm_from_pure(bell_phi_plus()), expected, atol=1e-15)


def test_dm_from_pure_is_idempotent():
    for label in "HVDARL":
        rho = dm_from_pure(basis_state(label))
        assert np.max(np.abs(rho @ rho - rho)) < 1e-10


def test_dm_from_pure_rejects_unnormalized():
    with pytest.raises(StateError):
        dm_from_pure(np.array([1.0, 1.0]))


def test_werner_limits():
    np.testing.assert_allclose(werner_state(1.0), dm_from_pure(bell_phi_plus()), atol=1e-15)
    np.testing.assert_allclose(werner_state(0.25), np.eye(4) / 4, atol=1e-15)


def test_werner_mixing_weight():
    rho = werner_state(0.989)
    p = (4 * 0.989 - 1) / 3
    assert p == pytest.approx(0.985333333, abs=1e-9)
    # the |HV><HV| population of p|phi+><phi+| + (1-p)I/4 is (1-p)/4
    assert rho[1, 1].real == pytest.approx((1 - p) / 4, abs=1e-15)


@pytest.mark.parametrize("f", [0.2, 1.01])
def test_werner_rejects_out_of_range(f):
    with pytest.raises(StateError):
        werner_state(f)


def test_fidelity_examples():
    assert fidelity(dm_from_pure(basis_state("H")), basis_state("H")) == pytest.approx(1.0)
    for label in "HVDARL":
        assert fidelity(maximally_mixed(2), basis_state(label)) == pytest.approx(0.5)
    assert fidelity(werner_state(0.989), bell_phi_plus()) == pytest.approx(0.989, abs=1e-12)


def test_fidelity_dim_mismatch():
    with pytest.raises(StateError):
        fidelity(maximally_mixed(4), basis_state("H"))


def test_purity_examples():
    assert purity(dm_from_pure(basis_state("R"))) == pytest.approx(1.0)
    assert purity(maximally_mixed(2)) == pytest.approx(0.5)


def test_purity_of_werner_by_explicit_matrix_square():
    rho = werner_state(0.989)
    # brute-force Tr(rho^2) with explicit loops
    tr = 0.0
    for i in range(4):
        for k in range(4):
            tr += (rho[i, k] * rho[k, i]).real
    assert purity(rho) == pytest.approx(tr, abs=1e-14)
    assert 0.25 <= tr <= 1


def test_tensor_examples():
    np.testing.assert_allclose(tensor(np.eye(2), np.eye(2)), np.eye(4))
    hv = tensor(dm_from_pure(basis_state("H")), dm_from_pure(basis_state("V")))
    ket_hv = np.array([0, 1, 0, 0])
    np.testing.assert_allclose(hv, np.outer(ket_hv, ket_hv))


def test_tensor_rejects_bad_dims():
    with pytest.raises(StateError):
        tensor(np.eye(4), np.eye(2))


def test_born_examples():
    e_h = dm_from_pure(basis_state("H"))
    assert born_probability(e_h, e_h) == pytest.approx(1.0)
    assert born_probability(dm_from_pure(basis_state("D")), e_h) == pytest.approx(0.5)


def test_born_rejects_non_psd_effect():
    with pytest.raises(StateError):
        born_probability(maximally_mixed(2), np.diag([1.0, -0.5]))


def test_check_density_matrix_rejects():
    with pytest.raises(StateError):
        check_density_matrix(np.diag([0.7, 0.7]))
    with pytest.raises(StateError):
        check_density_matrix(np.diag([1.2, -0.2]))
    with pytest.raises(StateError):
        check_density_matrix(np.array([[0.5, 0.5], [0.0, 0.5]]))


# -- properties --------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(f=st.floats(min_value=0.25, max_value=1.0))
def test_werner_round_trip(f):
    rho = check_density_matrix(werner_state(f))
    assert abs(fidelity(rho, bell_phi_plus()) - f) < 1e-10


@settings(max_examples=50, deadline=None)
@given(seed=seeds, alpha=st.floats(0, 1), dim=st.sampled_from([2, 4]))
def test_fidelity_linear_in_rho(seed, alpha, dim):
    rng = np.random.default_rng(seed)
    r1, r2 = random_density_matrix(dim, rng), random_density_matrix(dim, rng)
    psi = random_density_matrix(dim, rng, rank=1)
    ket = np.linalg.eigh(psi)[1][:, -1]
    mix = alpha * r1 + (1 - alpha) * r2
    expected = alpha * fidelity(r1, ket) + (1 - alpha) * fidelity(r2, ket)
    assert abs(fidelity(mix, ket) - expected) < 1e-9


@settings(max_examples=50, deadline=None)
@given(seed=seeds)
def test_tensor_trace_multiplicative(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    a, b = a + a.conj().T, b + b.conj().T
    assert np.trace(tensor(a, b)) == pytest.approx(np.trace(a) * np.trace(b), abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(seed=seeds, dim=st.sampled_from([2, 4]))
def test_born_completeness(seed, dim):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(dim, rng)
    w, v = np.linalg.eigh(random_density_matrix(dim, rng))
    effect = (v * (w / w.max())) @ v.conj().T
    total = born_probability(rho, effect) + born_probability(rho, np.eye(dim) - effect)
    assert abs(total - 1) < 1e-9
    assert -1e-9 <= born_probability(rho, effect) <= 1 + 1e-9


@settings(max_examples=50, deadline=None)
@given(seed=seeds, dim=st.sampled_from([2, 4]), rank=st.integers(1, 4))
def test_random_states_are_physical(seed, dim, rank):
    rho = random_density_matrix(dim, np.random.default_rng(seed), rank=min(rank, dim))
    check_density_matrix(rho)
    assert 1 / dim - 1e-12 <= purity(rho) <= 1 + 1e-12
