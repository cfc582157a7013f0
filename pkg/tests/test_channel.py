"""Channel-model checks: draw statistics, propagation, CSI perturbation."""

import numpy as np
import pytest

from hfmc.channel import (ChannelRealization, ChannelStats, GuardViolation,
                          NoiseSpec, add_awgn, apply_channel, draw_realization,
                          perturb_csi, realization_from_text,
                          realization_to_text)


def test_stats_validation():
    with pytest.raises(ValueError):
        ChannelStats(num_paths=0)
    with pytest.raises(ValueError):
        ChannelStats(mean_interarrival=0.0)
    with pytest.raises(ValueError):
        ChannelStats(a_max=-1e-3)


def test_draw_shapes_and_normalization():
    stats = ChannelStats()
    ch = draw_realization(stats, np.random.default_rng(3))
    assert ch.num_paths == 15
    assert ch.delays[0] == 0.0
    assert np.all(np.diff(ch.delays) > 0)
    assert ch.delays[-1] < stats.guard
    assert np.all(np.abs(ch.scales) <= stats.a_max)
    power = np.sum(np.abs(ch.gains) ** 2)
    assert power == pytest.approx(1.0, rel=1e-12), (
        f"per-draw gain power {power}, expected exactly 1")


def test_draw_determinism():
    stats = ChannelStats(num_paths=8)
    a = draw_realization(stats, np.random.default_rng(42))
    b = draw_realization(stats, np.random.default_rng(42))
    assert np.array_equal(a.gains, b.gains)
    assert np.array_equal(a.delays, b.delays)
    assert np.array_equal(a.scales, b.scales)


def test_power_profile_decay():
    """Mean tap power should fall roughly decay_db across the guard window."""
    stats = ChannelStats(num_paths=2, decay_db=20.0)
    ratio = stats.power_profile(stats.guard) / stats.power_profile(0.0)
    assert 10 * np.log10(ratio) == pytest.approx(-20.0, abs=1e-9)


def test_apply_channel_single_path_is_scaled_copy(desk_params):
    """One path at (tau, a): the received frame equals h * s((1+a)t - tau)."""
    from hfmc.modem import build_basis, modulate

    basis = build_basis("hfmc", desk_params)
    rng = np.random.default_rng(11)
    x = (rng.standard_normal(64) + 1j * rng.standard_normal(64)) / np.sqrt(2)
    frame = modulate(x, basis)
    t = basis.receive_times()
    h, tau, a = 0.8 - 0.1j, 3.7e-3, -2.1e-3
    ch = ChannelRealization(gains=np.array([h]), delays=np.array([tau]),
                            scales=np.array([a]))
    got = apply_channel(frame, ch, t)
    ref = h * frame.eval((1 + a) * t - tau)
    assert np.allclose(got, ref, rtol=0, atol=1e-12)


def test_apply_channel_superposition(desk_params):
    from hfmc.modem import build_basis, modulate

    basis = build_basis("hfmc", desk_params)
    rng = np.random.default_rng(12)
    x = (rng.standard_normal(64) + 1j * rng.standard_normal(64)) / np.sqrt(2)
    frame = modulate(x, basis)
    t = basis.receive_times()
    ch = draw_realization(ChannelStats(num_paths=4), rng)
    got = apply_channel(frame, ch, t)
    ref = sum(h * frame.eval((1 + a) * t - tau)
              for h, tau, a in zip(ch.gains, ch.delays, ch.scales))
    assert np.allclose(got, ref, rtol=0, atol=1e-12)


def test_guard_violation_on_excess_delay(desk_params):
    from hfmc.modem import build_basis, modulate

    basis = build_basis("hfmc", desk_params)
    x = np.ones(64, dtype=complex)
    frame = modulate(x, basis)
    t = basis.receive_times()
    bad = ChannelRealization(gains=np.array([1.0 + 0j]),
                             delays=np.array([2 * desk_params.prefix_time]),
                             scales=np.array([0.0]))
    with pytest.raises(GuardViolation):
        apply_channel(frame, bad, t)


def test_noise_spec_levels():
    spec = NoiseSpec(snr_db=20.0, sim_rate=320e3)
    assert spec.n0 == pytest.approx(1e-2)
    assert spec.sample_variance == pytest.approx(3.2e3)
    assert NoiseSpec(snr_db=float("inf"), sim_rate=320e3).n0 == 0.0


def test_add_awgn_statistics():
    spec = NoiseSpec(snr_db=0.0, sim_rate=4.0)  # sample variance 4
    r = np.zeros(200_000, dtype=complex)
    out = add_awgn(r, spec, np.random.default_rng(5))
    var = np.mean(np.abs(out) ** 2)
    assert var == pytest.approx(4.0, rel=0.02), f"noise variance {var:.3f}"
    silent = add_awgn(r, NoiseSpec(snr_db=float("inf"), sim_rate=4.0),
                      np.random.default_rng(5))
    assert np.array_equal(silent, r)


def test_perturb_csi_error_level():
    rng = np.random.default_rng(9)
    ch = draw_realization(ChannelStats(), rng)
    trials = 4000
    err = 0.0
    for _ in range(trials):
        est = perturb_csi(ch, 0.01, rng)
        err += np.sum(np.abs(est.gains - ch.gains) ** 2)
    nmse = err / trials / np.sum(np.abs(ch.gains) ** 2)
    assert nmse == pytest.approx(0.01, rel=0.05), (
        f"measured CSI error {nmse:.5f}, configured 0.01")
    assert perturb_csi(ch, 0.0, rng) is ch
    untouched = perturb_csi(ch, 0.01, np.random.default_rng(1))
    assert np.array_equal(untouched.delays, ch.delays)
    assert np.array_equal(untouched.scales, ch.scales)


def test_realization_text_round_trip():
    ch = draw_realization(ChannelStats(num_paths=6), np.random.default_rng(17))
    back = realization_from_text(realization_to_text(ch))
    assert np.array_equal(back.gains, ch.gains)
    assert np.array_equal(back.delays, ch.delays)
    assert np.array_equal(back.scales, ch.scales)


def test_realization_text_rejects_malformed():
    with pytest.raises(ValueError):
        realization_from_text("1.0 2.0 3.0\n")
