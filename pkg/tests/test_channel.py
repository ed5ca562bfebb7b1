import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfcbench.channel import (
    PUBLISHED_LOSSES_DB,
    CavitySpec,
    ChannelParams,
    DegenerateChannelError,
    apply_channel_one_qubit,
    apply_channel_to_pair,
    calibrate_budget,
    calibrate_noise,
    calibrate_phase_jitter,
    combine_admixtures,
    conversion_map,
    dephasing_factor,
    device_efficiency,
    raman_suppression,
    without_loss,
)
from qfcbench.qstate import (
    basis_state,
    bell_phi_plus,
    check_density_matrix,
    dm_from_pure,
    fidelity,
    partial_trace,
    random_density_matrix,
    trace_distance,
    werner_state,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)
BELL = bell_phi_plus()


def test_conversion_map_diagonal():
    k = conversion_map(ChannelParams(0.04, 0.0324, phase_rad=math.pi / 2))
    np.testing.assert_allclose(k, np.diag([0.2, 0.18j]), atol=1e-15)


def test_imbalanced_arms_on_d_by_hand():
    eh, ev = 0.04, 0.0324
    # K|D> = (sqrt(eh), sqrt(ev))/sqrt(2); overlap with |D> and norm written out
    amp_h, amp_v = math.sqrt(eh / 2), math.sqrt(ev / 2)
    norm2 = amp_h**2 + amp_v**2
    overlap = (amp_h + amp_v) / math.sqrt(2)
    oracle = overlap**2 / norm2
    assert oracle == pytest.approx(0.997238, abs=1e-6)
    out, prob = apply_channel_one_qubit(dm_from_pure(basis_state("D")), ChannelParams(eh, ev))
    assert fidelity(out, basis_state("D")) == pytest.approx(oracle, abs=1e-12)
    assert prob == pytest.approx(norm2, abs=1e-15)


def test_balanced_phase_pi_maps_d_to_a():
    out, _ = apply_channel_one_qubit(dm_from_pure(basis_state("D")), ChannelParams(0.3, 0.3, phase_rad=math.pi))
    np.testing.assert_allclose(out, dm_from_pure(basis_state("A")), atol=1e-12)


def test_full_noise_on_bell_gives_maximally_mixed():
    out, _ = apply_channel_to_pair(dm_from_pure(BELL), ChannelParams(noise_admixture=1.0))
    np.testing.assert_allclose(out, np.eye(4) / 4, atol=1e-12)


def test_noise_leaves_unconverted_marginal():
    rho = random_density_matrix(4, np.random.default_rng(3))
    out, _ = apply_channel_to_pair(rho, ChannelParams(noise_admixture=1.0), which="second")
    np.testing.assert_allclose(partial_trace(out, 0), partial_trace(rho, 0), atol=1e-12)
    np.testing.assert_allclose(partial_trace(out, 1), np.eye(2) / 2, atol=1e-12)


def test_which_first_mirrors_second():
    swap = np.eye(4)[[0, 2, 1, 3]]
    rho = random_density_matrix(4, np.random.default_rng(5))
    params = ChannelParams(0.3, 0.2, phase_rad=0.4, phase_jitter_rad=0.2, noise_admixture=0.1)
    a, pa = apply_channel_to_pair(rho, params, "second")
    b, pb = apply_channel_to_pair(swap @ rho @ swap, params, "first")
    np.testing.assert_allclose(swap @ a @ swap, b, atol=1e-12)
    assert pa == pytest.approx(pb)


def test_zero_probability_raises():
    with pytest.raises(DegenerateChannelError):
        apply_channel_one_qubit(dm_from_pure(basis_state("V")), ChannelParams(0.5, 0.0))


def test_bad_which_rejected():
    with pytest.raises(ValueError):
        apply_channel_to_pair(dm_from_pure(BELL), ChannelParams(), which="third")


@pytest.mark.parametrize(
    "kwargs",
    [dict(eta_h=1.5), dict(eta_v=-0.1), dict(noise_admixture=2.0), dict(phase_jitter_rad=-1.0),
     dict(loss_budget_db=(("x", -1.0),))],
)
def test_channel_params_validation(kwargs):
    with pytest.raises(ValueError):
        ChannelParams(**kwargs)


def test_jitter_average_matches_dephasing_closed_form():
    sigma = 0.3
    lam = dephasing_factor(sigma)
    exact, _ = apply_channel_to_pair(dm_from_pure(BELL), ChannelParams(phase_jitter_rad=sigma))
    assert fidelity(exact, BELL) == pytest.approx((1 + lam) / 2, abs=1e-14)
    rng = np.random.default_rng(11)
    n = 20000
    mc = sum(apply_channel_to_pair(dm_from_pure(BELL), ChannelParams(phase_jitter_rad=sigma), rng=rng)[0]
             for _ in range(n)) / n
    # coherence term averages exp(i x); its MC std is below 0.3/sqrt(n)
    assert trace_distance(mc, exact) < 5 * sigma / math.sqrt(n)


def test_device_efficiency_published_losses():
    p = ChannelParams(internal_efficiency=0.273, loss_budget_db=PUBLISHED_LOSSES_DB)
    assert device_efficiency(p) == pytest.approx(0.273 * 10 ** -0.88, rel=1e-12)
    assert abs(device_efficiency(p) - 0.0360) <= 0.0005


def test_removing_cavity_loss_gains_1_1_db():
    p = ChannelParams(internal_efficiency=0.273, loss_budget_db=PUBLISHED_LOSSES_DB)
    ratio = device_efficiency(without_loss(p, "cavity")) / device_efficiency(p)
    assert ratio == pytest.approx(10**0.11, rel=1e-12)
    assert ratio == pytest.approx(1.288, abs=1e-3)
    with pytest.raises(KeyError):
        without_loss(p, "nonexistent")


def test_device_efficiency_no_losses():
    assert device_efficiency(ChannelParams(internal_efficiency=0.5)) == 0.5


@settings(max_examples=50, deadline=None)
@given(perm=st.permutations(list(PUBLISHED_LOSSES_DB)))
def test_device_efficiency_order_independent(perm):
    a = device_efficiency(ChannelParams(internal_efficiency=0.273, loss_budget_db=PUBLISHED_LOSSES_DB))
    b = device_efficiency(ChannelParams(internal_efficiency=0.273, loss_budget_db=tuple(perm)))
    assert a == pytest.approx(b, rel=1e-14)


def test_raman_suppression():
    assert raman_suppression(CavitySpec()) == pytest.approx(168.0)
    assert raman_suppression(CavitySpec(conversion_band_ghz=40)) == pytest.approx(160.0)
    assert raman_suppression(CavitySpec(conversion_band_ghz=44)) == pytest.approx(176.0)
    assert raman_suppression(CavitySpec(bandwidth_mhz=500)) == pytest.approx(84.0)


def test_cavity_validation():
    with pytest.raises(ValueError):
        CavitySpec(fsr_ghz=40.0)
    with pytest.raises(ValueError):
        CavitySpec(duty_cycle=0.0)
    assert CavitySpec().usable_fraction == pytest.approx(0.94)


def test_calibrate_noise_closed_form():
    base = werner_state(0.989)
    # noise state has Bell fidelity 1/4, so F(p) = F0 - p (F0 - 1/4)
    for drop in (0.015, 0.031):
        p = calibrate_noise(drop, base)
        assert p == pytest.approx(drop / (0.989 - 0.25), abs=1e-8)
        out, _ = apply_channel_to_pair(base, ChannelParams(noise_admixture=p))
        assert fidelity(out, BELL) == pytest.approx(0.989 - drop, abs=1e-8)
    assert calibrate_noise(0.015, base) == pytest.approx(0.020298, abs=1e-6)
    assert calibrate_noise(0.031, base) == pytest.approx(0.041949, abs=1e-6)


def test_calibrate_noise_edges():
    base = werner_state(0.989)
    assert calibrate_noise(0.0, base) == 0.0
    assert calibrate_noise(0.989 - 0.25, base) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(ValueError):
        calibrate_noise(0.8, base)
    with pytest.raises(ValueError):
        calibrate_noise(-0.01, base)


def test_calibrate_phase_jitter_closed_form():
    # pure Bell: F = (1 + exp(-s^2/2))/2
    sigma = calibrate_phase_jitter(0.01, dm_from_pure(BELL))
    assert sigma == pytest.approx(math.sqrt(-2 * math.log(1 - 2 * 0.01)), abs=1e-9)


def test_combine_admixtures():
    assert combine_admixtures() == 0.0
    assert combine_admixtures(0.1, 0.2) == pytest.approx(1 - 0.9 * 0.8)
    base = werner_state(0.97)
    two = apply_channel_to_pair(apply_channel_to_pair(base, ChannelParams(noise_admixture=0.1))[0],
                                ChannelParams(noise_admixture=0.2))[0]
    one = apply_channel_to_pair(base, ChannelParams(noise_admixture=combine_admixtures(0.1, 0.2)))[0]
    np.testing.assert_allclose(two, one, atol=1e-12)


def test_calibrate_budget_chain():
    cal = calibrate_budget(0.989, 0.013, {"raman": 0.015, "dark": 0.016})
    chain = dict(cal.fidelity_chain)
    assert chain["source"] == pytest.approx(0.989, abs=1e-12)
    assert chain["alignment"] == pytest.approx(0.976, abs=1e-8)
    assert chain["raman"] == pytest.approx(0.961, abs=1e-8)
    assert chain["dark"] == pytest.approx(0.945, abs=1e-8)
    # the combined channel applied to the source lands at the same raw fidelity
    out = apply_channel_to_pair(werner_state(0.989), cal.channel(ChannelParams()))[0]
    assert fidelity(out, BELL) == pytest.approx(0.945, abs=1e-8)
    no_dark = apply_channel_to_pair(werner_state(0.989), cal.channel(ChannelParams(), exclude=("dark",)))[0]
    assert fidelity(no_dark, BELL) == pytest.approx(0.961, abs=1e-8)


def test_calibrate_budget_pure_phase():
    cal = calibrate_budget(0.989, 0.013, {}, phase_fraction=1.0)
    assert cal.misalignment_admixture == 0.0
    assert dict(cal.fidelity_chain)["alignment"] == pytest.approx(0.976, abs=1e-9)
    with pytest.raises(ValueError):
        calibrate_budget(0.989, 0.013, {}, phase_fraction=1.5)


@settings(max_examples=100, deadline=None)
@given(seed=seeds, eta=st.floats(0.01, 1.0), dim=st.sampled_from([2, 4]))
def test_balanced_channel_is_identity(seed, eta, dim):
    rho = random_density_matrix(dim, np.random.default_rng(seed))
    params = ChannelParams(eta, eta)
    apply = apply_channel_one_qubit if dim == 2 else apply_channel_to_pair
    out, prob = apply(rho, params)
    assert np.max(np.abs(out - rho)) < 1e-10
    assert prob == pytest.approx(eta, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=seeds, eh=st.floats(0.01, 1), ev=st.floats(0.01, 1), phi=st.floats(-7, 7),
       sigma=st.floats(0, 2), p=st.floats(0, 1))
def test_channel_output_physical(seed, eh, ev, phi, sigma, p):
    rho = random_density_matrix(4, np.random.default_rng(seed))
    out, prob = apply_channel_to_pair(rho, ChannelParams(eh, ev, phi, sigma, p))
    check_density_matrix(out)
    assert 0 < prob <= 1 + 1e-12
