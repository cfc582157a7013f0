"""Spectrum, orthogonality, and approximation-quality metrics."""

import warnings

import numpy as np
import pytest

from hfmc.analysis import (approx_mse_db, gram_matrix_db, in_band_deviation_db,
                           orthogonality_sweep, out_of_band_fraction, sir_db,
                           spectrum_dft, spectrum_stationary_phase,
                           subcarrier_band, transmit_gram)


def test_subcarrier_band_edges(full_params):
    """Band of the first subcarrier, frozen from the edge formulas:
    start = K / (t0 + (1+a)T - t_m), end = K / (t0 - T_p - t_m)."""
    f_start, f_end = subcarrier_band(full_params, 0)
    assert f_start == pytest.approx(47500.0, abs=0.1)
    assert f_end == pytest.approx(49879.7, abs=0.1)


def test_subcarrier_bands_inside_system_band(full_params):
    p = full_params
    f_lo, f_hi = p.f_c - p.bandwidth / 2, p.f_c + p.bandwidth / 2
    starts, ends = [], []
    for m in range(0, p.num_tx, 17):
        fs, fe = subcarrier_band(p, m)
        assert f_lo - 1e-6 <= fs < fe <= f_hi * (1 + p.a_max) + 1e-6, (
            f"subcarrier {m} band ({fs:.1f}, {fe:.1f}) outside the system band")
        starts.append(fs)
        ends.append(fe)
    assert np.all(np.diff(starts) > 0), "band starts must increase with m"
    assert np.all(np.diff(ends) > 0), "band ends must increase with m"


def test_dft_spectrum_parseval(full_params):
    est = spectrum_dft(full_params, 0)
    ratio = est.spectral_energy() / est.time_energy
    assert abs(ratio - 1.0) < 1e-12, f"Parseval ratio {ratio}"


def test_dft_spectrum_confinement(full_params):
    """Out-of-band fraction and in-band flatness for a spread of
    subcarriers; the full-population check lives in the acceptance suite."""
    p = full_params
    for m in (0, 64, 128, 255):
        est = spectrum_dft(p, m)
        band = subcarrier_band(p, m)
        oob = out_of_band_fraction(est, band)
        assert oob < 0.02, f"subcarrier {m}: out-of-band fraction {oob:.4f}"
        dev = in_band_deviation_db(est, p, m)
        assert dev < 1.5, f"subcarrier {m}: in-band deviation {dev:.2f} dB"


def test_stationary_phase_matches_dft_in_band(full_params):
    """The flat stationary-phase level should track the measured magnitude
    inside the band away from the Fresnel edges."""
    p = full_params
    m = 128
    est = spectrum_dft(p, m)
    model = spectrum_stationary_phase(p, m, est.freqs)
    fs, fe = subcarrier_band(p, m)
    trim = 0.1 * (fe - fs)
    sel = (est.freqs > fs + trim) & (est.freqs < fe - trim)
    ratio = np.mean(np.abs(est.values[sel])) / np.mean(np.abs(model.values[sel]))
    assert ratio == pytest.approx(1.0, abs=0.03), (
        f"measured/model in-band magnitude ratio {ratio:.4f}")


def test_stationary_phase_zero_outside_band(full_params):
    p = full_params
    fs, fe = subcarrier_band(p, 0)
    freqs = np.array([fs - 200.0, (fs + fe) / 2, fe + 200.0])
    model = spectrum_stationary_phase(p, 0, freqs)
    assert model.values[0] == 0.0 and model.values[2] == 0.0
    assert abs(model.values[1]) > 0.0


def test_stationary_phase_warns_when_invalid(full_params):
    import dataclasses

    p = dataclasses.replace(full_params, fm_rate=full_params.fm_rate / 1e4,
                            delay_res=full_params.delay_res * 1e4)
    freqs = np.linspace(47e3, 53e3, 50)
    with pytest.warns(UserWarning, match="stationary"):
        spectrum_stationary_phase(p, 0, freqs)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        spectrum_stationary_phase(full_params, 0, freqs)  # no warning


def test_transmit_gram_diagonal_and_symmetry(full_params):
    gram = transmit_gram(full_params)
    assert gram.shape == (256, 256)
    assert np.max(np.abs(np.diag(gram) - 1.0)) < 1e-12
    assert np.max(np.abs(gram - gram.conj().T)) < 1e-12
    gdb = gram_matrix_db(full_params)
    assert np.max(np.abs(np.diag(gdb))) < 1e-3, "diagonal must sit at 0 dB"
    off = gdb[~np.eye(256, dtype=bool)]
    assert np.max(off) < -10.0, "every cross term sits well below the diagonal"


def test_sir_reference_value(full_params):
    """Total-signal over total-interference ratio of the designed gram."""
    assert sir_db(full_params) == pytest.approx(16.3159, abs=2e-3)


def test_sir_of_identity_gram_is_rejected(full_params):
    """A perfectly orthogonal gram has no interference to divide by."""
    with pytest.raises(AssertionError, match="interference-free"):
        sir_db(full_params, gram=np.eye(8, dtype=complex))


def test_approx_mse_values(full_params):
    """Sinc-approximation error against the exact correlation kernel.

    normalized=True divides by the exact kernel energy and is the
    reciprocal of the SIR; normalized=False is the plain mean over matrix
    entries, the reading under which the error sits below -40 dB."""
    norm_db = approx_mse_db(full_params, target="theorem1")
    plain_db = approx_mse_db(full_params, target="theorem1", normalized=False)
    assert norm_db == pytest.approx(-16.4162, abs=2e-3)
    assert plain_db == pytest.approx(-40.3983, abs=2e-3)
    # the approximation's entire error is the off-diagonal residue, so the
    # normalized MSE is interference over total energy: -10log10(SIR_lin + 1)
    sir_lin = 10.0 ** (sir_db(full_params) / 10.0)
    assert norm_db == pytest.approx(-10 * np.log10(sir_lin + 1.0), abs=1e-9)


def test_approx_mse_theorem3_needs_channel(full_params, desk_params):
    from hfmc.channel import ChannelStats, draw_realization

    with pytest.raises(ValueError):
        approx_mse_db(full_params, target="theorem3")
    ch = draw_realization(ChannelStats(), np.random.default_rng(2))
    val = approx_mse_db(desk_params, target="theorem3", ch=ch)
    assert -40.0 < val < -1.0, f"theorem-3 approximation error {val:.2f} dB"
    with pytest.raises(ValueError):
        approx_mse_db(full_params, target="theorem2")


def test_orthogonality_sweep_monotone(table_config):
    """Each epsilon designed at its own reference-time ceiling: SIR falls
    and approximation MSE rises as epsilon grows.  Endpoints frozen."""
    eps = np.round(np.arange(0.018, 0.0501, 0.004), 6)
    rows = orthogonality_sweep(table_config, eps)
    assert len(rows) == 9
    sirs = [r[1] for r in rows]
    mses = [r[2] for r in rows]
    assert sirs[0] == pytest.approx(19.304, abs=5e-3)
    assert sirs[-1] == pytest.approx(13.774, abs=5e-3)
    assert mses[0] == pytest.approx(-19.355, abs=5e-3)
    assert mses[-1] == pytest.approx(-13.953, abs=5e-3)
    assert all(b < a + 1e-9 for a, b in zip(sirs, sirs[1:])), (
        f"SIR not nonincreasing: {sirs}")
    assert all(b > a - 1e-9 for a, b in zip(mses, mses[1:])), (
        f"approximation MSE not nondecreasing: {mses}")
