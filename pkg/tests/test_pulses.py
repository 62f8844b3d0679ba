import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adiabatic_cz.adiabaticity import DFactorCurve
from adiabatic_cz.device import ANGULAR_PER_MHZ, flux_to_frequency
from adiabatic_cz.errors import ConstraintViolation, OutOfRange, RangeExceeded
from adiabatic_cz.pulses import (
    UNIT_AMPLITUDE,
    UNIT_FLUX,
    AwpSpec,
    Waveform,
    awp_generate,
    awp_lambda_for_peak,
    awp_lambda_max,
    bridge_gaps,
    cosine_pulse,
    fourier_cosine,
    integrate_G,
    refined_total_D,
    scale_envelope,
    slepian_like_speed_profile,
    waveform_flux_to_freq,
    waveform_freq_to_flux,
)


def flat_curve(lo, hi, value=1.0, n=50):
    grid = np.linspace(lo, hi, n)
    total = np.full(n, value)
    return DFactorCurve(grid, [], [], np.zeros((n, 0, 0)), np.zeros((n, 0)), total, np.zeros(n, bool))


@pytest.fixture(scope="module")
def d_curve(measured):
    return refined_total_D(measured, np.linspace(2540.0, 3621.9, 200), 2540.0)


def test_cosine_peak_is_one():
    V = fourier_cosine(24.0, [0.5], 0.1)
    assert V.samples[120] == pytest.approx(1.0, abs=1e-15)
    assert V.samples[0] == 0.0 and V.samples[-1] == 0.0
    assert V.unit == UNIT_AMPLITUDE


def test_two_term_quarter_value():
    V = fourier_cosine(20.0, [0.5, 0.2], 0.05)
    assert V.samples[100] == pytest.approx(0.9, abs=1e-12)


def test_odd_sum_constraint():
    with pytest.raises(ConstraintViolation):
        fourier_cosine(20.0, [0.4], 0.1)
    fourier_cosine(20.0, [0.3, -0.1, 0.2], 0.1)


def test_t_cz_must_be_multiple_of_dt():
    with pytest.raises(ValueError):
        fourier_cosine(20.05, [0.5], 0.1)


def test_negative_second_harmonic_slows_rise():
    base = fourier_cosine(24.0, [0.5], 0.01).samples
    slow = fourier_cosine(24.0, [0.5, -0.1], 0.01).samples
    assert abs(slow[1] - slow[0]) < abs(base[1] - base[0])


@given(st.lists(st.floats(-0.3, 0.3), min_size=1, max_size=4))
@settings(max_examples=30, deadline=None)
def test_fourier_endpoints_zero(extra):
    a = [0.5] + extra
    a[2::2] = [0.0] * len(a[2::2])  # keep the odd sum at 0.5
    V = fourier_cosine(10.0, a, 0.05)
    assert V.samples[0] == 0.0 and V.samples[-1] == 0.0


def test_scale_envelope_frequency_and_flux(measured):
    env = fourier_cosine(20.0, [0.5], 0.1)
    fw = scale_envelope(env, 2540.0, 900.0)
    assert fw.samples.max() == pytest.approx(3440.0)
    xw = scale_envelope(env, 2540.0, 900.0, domain="flux", coupler=measured.coupler)
    assert xw.samples.max() == pytest.approx(3440.0, abs=1e-6)
    assert xw.samples[0] == pytest.approx(2540.0, abs=1e-6)
    # flux-linear pulses spend longer near the top than frequency-linear ones
    assert np.mean(xw.samples) > np.mean(fw.samples)


def test_constant_D_gives_pure_cosine():
    curve = flat_curve(2000.0, 4000.0, value=5.0)
    lam = 0.3
    w = awp_generate(AwpSpec(20.0, lam, curve, 2500.0), 0.1)
    t = np.linspace(0, 20.0, w.samples.size)
    peak = lam * 20.0 / (2 * np.pi) / (ANGULAR_PER_MHZ * 5.0)
    expected = 2500.0 + peak * (1 - np.cos(2 * np.pi * t / 20.0))
    np.testing.assert_allclose(w.samples, expected, atol=1e-8)


def test_awp_endpoints_and_single_maximum(d_curve):
    w = awp_generate(AwpSpec(24.0, 0.3, d_curve, 2540.0), 0.01)
    assert w.samples[0] == 2540.0 and w.samples[-1] == 2540.0
    k = int(np.argmax(w.samples))
    assert abs(k - (w.samples.size - 1) / 2) <= 1
    assert np.all(np.diff(w.samples[: k + 1]) >= 0) and np.all(np.diff(w.samples[k:]) <= 0)


def test_awp_satisfies_rate_equation(d_curve):
    lam, t_cz = 0.3, 24.0
    w = awp_generate(AwpSpec(t_cz, lam, d_curve, 2540.0), 0.005)
    t = np.arange(w.samples.size) * w.dt
    speed = slepian_like_speed_profile(w)
    D = np.interp(w.samples, d_curve.grid, bridge_gaps(d_curve.grid, d_curve.total))
    lhs = D * ANGULAR_PER_MHZ * speed
    rhs = lam * np.sin(2 * np.pi * t / t_cz)
    rms = np.sqrt(np.mean((lhs - rhs) ** 2)) / np.sqrt(np.mean(rhs**2))
    assert rms < 0.01


def test_awp_speed_minimum_at_D_maximum(d_curve):
    lam, t_cz = 0.4, 24.0
    w = awp_generate(AwpSpec(t_cz, lam, d_curve, 2540.0), 0.005)
    n = w.samples.size
    t = np.arange(n) * w.dt
    rise = slice(int(0.05 * n), int(0.45 * n))
    speed = slepian_like_speed_profile(w)[rise] / np.sin(2 * np.pi * t[rise] / t_cz)
    D = np.interp(w.samples[rise], d_curve.grid, d_curve.total)
    assert abs(int(np.argmin(speed)) - int(np.argmax(D))) <= 2


def test_awp_peak_grows_with_lambda(d_curve):
    peaks = [awp_generate(AwpSpec(24.0, lam, d_curve, 2540.0), 0.01).samples.max()
             for lam in (0.1, 0.2, 0.3, 0.4)]
    assert np.all(np.diff(peaks) > 0)


def test_awp_range_exceeded(d_curve):
    lam_max = awp_lambda_max(d_curve, 24.0, 2540.0)
    awp_generate(AwpSpec(24.0, 0.999 * lam_max, d_curve, 2540.0), 0.01)
    with pytest.raises(RangeExceeded):
        awp_generate(AwpSpec(24.0, 1.01 * lam_max, d_curve, 2540.0), 0.01)


def test_lambda_for_peak_hits_requested_peak(d_curve):
    lam = awp_lambda_for_peak(d_curve, 24.0, 2540.0, 3500.0)
    w = awp_generate(AwpSpec(24.0, lam, d_curve, 2540.0), 0.01)
    assert w.samples.max() == pytest.approx(3500.0, abs=0.5)


def test_refinement_converges(measured, d_curve):
    G_ref = integrate_G(d_curve.grid, d_curve.total)[-1]
    finer = refined_total_D(measured, np.linspace(2540.0, 3621.9, 400), 2540.0)
    G_fine = integrate_G(finer.grid, finer.total)[-1]
    assert abs(G_fine - G_ref) < 1e-5 * G_ref


def test_bridge_gaps_log_linear():
    out = bridge_gaps([0.0, 1.0, 2.0], [1.0, np.nan, 100.0])
    assert out[1] == pytest.approx(10.0)


def test_freq_to_flux_constant_at_max(measured):
    c = measured.coupler
    w = Waveform(np.full(5, c.f_max), 0.1)
    np.testing.assert_allclose(waveform_freq_to_flux(w, c).samples, 0.0, atol=1e-7)


def test_freq_flux_round_trip_on_awp(measured, d_curve):
    w = awp_generate(AwpSpec(24.0, 0.35, d_curve, 2540.0), 0.01)
    x = waveform_freq_to_flux(w, measured.coupler)
    assert x.unit == UNIT_FLUX
    np.testing.assert_allclose(waveform_flux_to_freq(x, measured.coupler).samples, w.samples, rtol=1e-9)
    k = int(np.argmax(w.samples))
    assert np.all(np.diff(x.samples[: k + 1]) <= 0)  # rising frequency, falling flux


def test_freq_to_flux_reports_bad_sample(measured):
    c = measured.coupler
    w = Waveform([3000.0, 3100.0, c.f_max + 10.0, 3000.0], 0.1)
    with pytest.raises(OutOfRange) as info:
        waveform_freq_to_flux(w, c)
    assert info.value.index == 2


def test_speed_profile_trivial_cases():
    assert np.all(slepian_like_speed_profile(Waveform(np.full(10, 3000.0), 0.1)) == 0.0)
    ramp = Waveform(3000.0 + 7.0 * 0.1 * np.arange(20), 0.1)
    np.testing.assert_allclose(slepian_like_speed_profile(ramp), 7.0, rtol=1e-12)


def test_waveform_csv_round_trip(tmp_path):
    w = cosine_pulse(20.0, 2540.0, 3500.0, 0.5, pad=2.0)
    path = w.save_csv(tmp_path / "w.csv", {"seed": 0})
    back = Waveform.from_csv(path)
    np.testing.assert_allclose(back.samples, w.samples, rtol=1e-11)
    assert back.dt == w.dt and back.pad_before == 2.0 and back.pad_after == 2.0
    assert path.read_text().splitlines()[0] == "# seed=0"
    assert "t_ns,value,unit" in path.read_text()


def test_padding_holds_end_values():
    w = cosine_pulse(10.0, 2540.0, 3000.0, 0.1, pad=2.0)
    assert w.duration == pytest.approx(14.0)
    assert w.value_at(1.0) == 2540.0 and w.value_at(13.5) == 2540.0
    assert w.value_at(7.0) == pytest.approx(3000.0)


def test_waveform_validation():
    with pytest.raises(ValueError):
        Waveform([], 0.1)
    with pytest.raises(ValueError):
        Waveform([1.0, 2.0], 0.0)
    with pytest.raises(ValueError):
        Waveform([-1.0, 2.0], 0.1)
    with pytest.raises(ValueError):
        Waveform([1.0], 0.1, unit="volts")
