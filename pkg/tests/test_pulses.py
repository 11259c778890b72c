import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from itoffoli.circuit import GHZ, MHZ
from itoffoli.effective import EffectiveParams, build_effective_hamiltonian
from itoffoli.hilbert import ModeLayout
from itoffoli.perturbation import DispersiveShifts, ShiftEntry, chi3_123, shift_report
from itoffoli.pulses import (
    DriveSignal,
    bias_schedule,
    default_drag,
    drag_drive,
    drive_frequency,
    gaussian_envelope,
    sample_waveform,
    write_waveform_csv,
)
from itoffoli.spectrum import labeled_spectrum

TG = 500e-9


def signal(**kw):
    base = dict(peak_amplitude=1.5 * MHZ, gate_time=TG, drive_freq=5.29 * GHZ)
    base.update(kw)
    return DriveSignal(**base)


signals = st.builds(
    lambda amp, tg, frac, drag, phase: DriveSignal(amp * MHZ, tg * 1e-9, 5.29 * GHZ, sigma=frac * tg * 1e-9, drag=drag * 1e-9, phase=phase),
    st.floats(0.1, 5.0), st.floats(50, 1000), st.floats(0.05, 2.0), st.floats(-20, 20), st.floats(-math.pi, math.pi),
)


def test_envelope_peak_and_edges():
    s = signal()
    assert gaussian_envelope(TG / 2, s) == pytest.approx(s.peak_amplitude, rel=1e-14)
    assert gaussian_envelope(0.0, s) == 0.0
    assert gaussian_envelope(TG, s) == pytest.approx(0.0, abs=1e-9 * s.peak_amplitude)
    assert gaussian_envelope(-1e-9, s) == 0.0 and gaussian_envelope(TG + 1e-9, s) == 0.0


def test_envelope_formula():
    s = signal(sigma=TG / 6)
    t = np.linspace(0, TG, 11)
    edge = math.exp(-((TG / 2) ** 2) / (2 * s.sigma**2))
    expected = s.peak_amplitude * (np.exp(-((t - TG / 2) ** 2) / (2 * s.sigma**2)) - edge) / (1 - edge)
    assert np.allclose(gaussian_envelope(t, s), expected, rtol=1e-12, atol=1e-9)


def test_envelope_symmetric():
    s = signal(sigma=TG / 5)
    t = np.random.default_rng(0).uniform(0, TG, 10)
    assert np.allclose(gaussian_envelope(t, s), gaussian_envelope(TG - t, s), rtol=1e-12)


def test_nonpositive_sigma_rejected():
    with pytest.raises(ValueError):
        signal(sigma=0.0)


def test_derivative_matches_finite_difference():
    s = signal(sigma=TG / 4)
    t = np.linspace(0.05 * TG, 0.95 * TG, 9)
    h = 1e-13
    fd = (gaussian_envelope(t + h, s) - gaussian_envelope(t - h, s)) / (2 * h)
    scale = np.max(np.abs(fd))
    assert np.allclose(s.envelope_derivative(t), fd, rtol=1e-5, atol=1e-6 * scale)


def test_derivative_integrates_to_zero():
    s = signal()
    # integrate over nanoseconds to keep the quadrature well scaled
    area, _ = quad(lambda tau: s.envelope_derivative(tau * 1e-9) * 1e-9, 0, TG * 1e9, limit=200, epsabs=1e-10 * s.peak_amplitude)
    assert abs(area) < 1e-8 * s.peak_amplitude


def test_no_drag_is_pure_in_phase():
    s = signal(drag=0.0, phase=0.3)
    t = np.linspace(0, TG, 101)
    assert np.allclose(drag_drive(t, s), gaussian_envelope(t, s) * np.cos(s.drive_freq * t + 0.3), atol=1e-6)


def test_drag_quadrature():
    s = signal(drag=2e-9, phase=0.0)
    t = np.linspace(0, TG, 101)
    expected = gaussian_envelope(t, s) * np.cos(s.drive_freq * t) + 2e-9 * s.envelope_derivative(t) * np.sin(s.drive_freq * t)
    assert np.allclose(drag_drive(t, s), expected, atol=1e-6)


def test_default_drag_value():
    assert default_drag(-240 * MHZ) * 1e9 == pytest.approx(0.663, abs=5e-4)


@settings(max_examples=40, deadline=None)
@given(signals)
def test_drive_bounded_and_zero_at_edges(s):
    t = np.linspace(0, s.gate_time, 2001)
    da_max = np.max(np.abs(s.envelope_derivative(t)))
    bound = abs(s.peak_amplitude) * (1 + abs(s.drag) * da_max / abs(s.peak_amplitude))
    assert np.all(np.abs(drag_drive(t, s)) <= bound * (1 + 1e-12))
    # the envelope vanishes at both edges; the DRAG quadrature keeps beta A'(edge) sin(phase)
    assert gaussian_envelope(0.0, s) == 0.0
    assert abs(gaussian_envelope(s.gate_time, s)) <= 1e-9 * abs(s.peak_amplitude)
    edge = s.drag * s.envelope_derivative(0.0) * math.sin(s.phase)
    assert drag_drive(0.0, s) == pytest.approx(edge, rel=1e-12, abs=1e-9 * bound)
    assert abs(drag_drive(0.0, s.with_(drag=0.0))) == 0.0


@settings(max_examples=30, deadline=None)
@given(signals)
def test_rotating_coefficient_is_carrier_envelope(s):
    """Lab field equals twice the real part of the coefficient times the carrier."""
    t = np.linspace(0, s.gate_time, 50)
    c = s.rotating_coefficient(t, s.drive_freq)
    lab = 2 * np.real(c * np.exp(1j * s.drive_freq * t))
    assert np.allclose(lab, drag_drive(t, s), atol=1e-6 * abs(s.peak_amplitude))


def test_flat_top_envelope():
    s = signal(envelope="flat_top_gaussian", plateau=200e-9, sigma=40e-9)
    t = np.linspace(160e-9, 340e-9, 7)
    assert np.allclose(gaussian_envelope(t, s), s.peak_amplitude)
    assert gaussian_envelope(0.0, s) == 0.0
    assert gaussian_envelope(TG, s) == pytest.approx(0.0, abs=1e-9 * s.peak_amplitude)


def test_drive_frequency_without_shifts():
    eff = EffectiveParams.from_units((4.984, 5.3, 4.82), (-330, -240, -330), (0, 0, 0))
    assert drive_frequency(shift_report(eff), eff) == pytest.approx(eff.freq[1], rel=1e-15)


def test_drive_frequency_table_shifts():
    eff = EffectiveParams.from_units((4.984, 5.3, 4.82), (-330, -240, -330), (15.4, 29.2, 2))
    shifts = DispersiveShifts(chi12=ShiftEntry(exact=-5.1 * MHZ), chi23=ShiftEntry(exact=-4.95 * MHZ))
    assert drive_frequency(shifts, eff) / GHZ == pytest.approx(5.28995, abs=1e-9)


def test_drive_frequency_modes_agree(headline):
    h = build_effective_hamiltonian(headline, ModeLayout.qubits(4))
    exact = drive_frequency(mode="exact_spectrum", spectrum=labeled_spectrum(h.static, h.layout))
    analytic = drive_frequency(shift_report(headline), headline)
    assert abs(exact - analytic) <= abs(chi3_123(headline))


def test_drive_frequency_missing_inputs():
    with pytest.raises(ValueError):
        drive_frequency(mode="analytic")
    with pytest.raises(ValueError):
        drive_frequency(mode="exact_spectrum")


def test_weak_drive_precondition():
    assert signal(peak_amplitude=1.5 * MHZ).check_weak_drive(-5.1 * MHZ, -4.95 * MHZ)
    with pytest.warns(UserWarning):
        assert not signal(peak_amplitude=6 * MHZ).check_weak_drive(-5.1 * MHZ, -4.95 * MHZ)


def test_bias_schedule_rectangular():
    b = bias_schedule((0.3, 0.4), ramp=0.0, gate_time=TG)
    assert np.allclose(b.value([0.0, TG / 2, TG]), [[0.3, 0.4]] * 3)
    assert np.allclose(b.value(-1e-9), 0) and np.allclose(b.value(TG + 1e-9), 0)


def test_bias_schedule_hold_and_continuity():
    b = bias_schedule((0.3, 0.4), ramp=50e-9, gate_time=TG)
    assert np.allclose(b.value(b.window / 2), [0.3, 0.4])
    assert np.allclose(b.value([b.drive_start, b.drive_start + TG]), [[0.3, 0.4]] * 2)
    for edge in (0.0, b.ramp, b.window - b.ramp, b.window):
        lo, hi = b.value(edge - 1e-18), b.value(edge + 1e-18)
        assert np.max(np.abs(lo - hi)) < 1e-12
    t = np.linspace(0, b.ramp, 200)
    assert np.all(np.diff(b.value(t)[:, 0]) >= 0)
    assert np.allclose(b.josephson_energy(b.window / 2, (20.0, 20.0)), 2 * 20 * np.cos(np.array([0.3, 0.4]) / 2))


def test_bias_schedule_window_too_short():
    with pytest.raises(ValueError):
        bias_schedule((0.3, 0.4), ramp=100e-9, gate_time=TG, window=600e-9)


def test_waveform_export(tmp_path):
    s = signal()
    t, w = sample_waveform(s, rate=1e9)
    assert len(t) == 501 and w[0] == 0.0
    with write_waveform_csv(tmp_path / "w.csv", s, rate=1e9).open(encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t_ns", "omega_over_2pi_mhz"] and len(rows) == 502
    assert s.to_dict()["sigma_ns"] == pytest.approx(TG / 6 * 1e9)
