import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfcbench.polopt import (
    MeasurementSetting,
    WaveplateSetting,
    fringe_settings,
    joint_projector,
    projector_for,
    six_settings,
    waveplate_operator,
)
from qfcbench.qstate import basis_state, bell_phi_plus, dm_from_pure

angles = st.floats(min_value=-720, max_value=720, allow_nan=False)


def _same_up_to_phase(a, b):
    return abs(abs(np.vdot(a, b)) - 1) < 1e-12


def test_hwp_zero_keeps_h():
    out = waveplate_operator(WaveplateSetting("half", 0.0)) @ basis_state("H")
    assert _same_up_to_phase(out, basis_state("H"))


def test_hwp_22_5_rotates_h_to_d():
    out = waveplate_operator(WaveplateSetting("half", 22.5)) @ basis_state("H")
    assert _same_up_to_phase(out, basis_state("D"))


def test_qwp_45_maps_r_to_h_and_l_to_v():
    q = waveplate_operator(WaveplateSetting("quarter", 45.0))
    assert _same_up_to_phase(q @ basis_state("R"), basis_state("H"))
    assert _same_up_to_phase(q @ basis_state("L"), basis_state("V"))


def test_waveplate_angle_normalized():
    assert WaveplateSetting("half", 190.0).angle_deg == pytest.approx(10.0)
    assert WaveplateSetting("half", -22.5).angle_deg == pytest.approx(157.5)


def test_waveplate_rejects_kind():
    with pytest.raises(ValueError):
        WaveplateSetting("full", 0.0)


def test_projector_examples():
    np.testing.assert_allclose(projector_for(MeasurementSetting(0.0)), dm_from_pure(basis_state("H")), atol=1e-12)
    np.testing.assert_allclose(projector_for(MeasurementSetting(22.5)), dm_from_pure(basis_state("D")), atol=1e-12)


def test_six_settings_project_onto_basis_states():
    settings_ = six_settings()
    assert len(settings_) == 6
    for s, label in zip(settings_, "HVDARL"):
        p = projector_for(s)
        np.testing.assert_allclose(p, dm_from_pure(basis_state(label)), atol=1e-12)
        assert np.linalg.matrix_rank(p, tol=1e-9) == 1
    p = [projector_for(s) for s in settings_]
    np.testing.assert_allclose(p[0] + p[1], np.eye(2), atol=1e-12)


def test_fringe_settings():
    pairs = fringe_settings("H", [0.0])
    np.testing.assert_allclose(projector_for(pairs[0][1]), dm_from_pure(basis_state("H")), atol=1e-12)
    assert len(fringe_settings("D", np.linspace(0, 180, 7))) == 7
    with pytest.raises(ValueError):
        fringe_settings("H", [])
    with pytest.raises(ValueError):
        fringe_settings("R", [0.0])


def test_fringe_d_at_22_5_is_half_and_maximal():
    bell = dm_from_pure(bell_phi_plus())
    # P_D x P_D on |phi+>: |<DD|phi+>|^2 = 1/2
    p = np.trace(joint_projector(fringe_settings("D", [22.5])[0]) @ bell).real
    assert p == pytest.approx(0.5, abs=1e-12)
    grid = np.linspace(0, 180, 721)
    scan = [np.trace(joint_projector(s) @ bell).real for s in fringe_settings("D", grid)]
    assert max(scan) == pytest.approx(0.5, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(theta=angles, kind=st.sampled_from(["half", "quarter"]))
def test_waveplates_unitary(theta, kind):
    w = waveplate_operator(WaveplateSetting(kind, theta))
    assert np.max(np.abs(w.conj().T @ w - np.eye(2))) < 1e-12


@settings(max_examples=100, deadline=None)
@given(hwp=angles, qwp=st.one_of(st.none(), angles))
def test_ports_complete_and_idempotent(hwp, qwp):
    t = projector_for(MeasurementSetting(hwp, "transmit", qwp))
    r = projector_for(MeasurementSetting(hwp, "reflect", qwp))
    assert np.max(np.abs(t + r - np.eye(2))) < 1e-10
    assert np.max(np.abs(t @ t - t)) < 1e-10
    assert np.trace(t).real == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(theta=angles)
def test_hwp_projector_period_90(theta):
    a = projector_for(MeasurementSetting(theta))
    b = projector_for(MeasurementSetting(theta + 90.0))
    assert np.max(np.abs(a - b)) < 1e-10
