import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adiabatic_cz.device import (
    COMPUTATIONAL,
    DeviceParams,
    HilbertLabel,
    TunableCouplerParams,
    bare_energies,
    build_hamiltonian,
    coupling_g,
    decoupled,
    flux_to_frequency,
    frequency_to_flux,
    frequency_to_flux_bisect,
    load_device,
    save_device,
    squid_ej,
)
from adiabatic_cz.errors import ConfigError, DimensionOverflow, OutOfRange
from adiabatic_cz.spectrum import labelled_eigensystem, track_spectrum

from conftest import small_device


def test_squid_ej_zero_flux_is_sum(measured):
    c = measured.coupler
    assert squid_ej(c, 0.0) == pytest.approx(c.ej_sum, rel=1e-14)


def test_squid_ej_half_flux_is_difference(measured):
    c = measured.coupler
    r = c.jj_ratio
    assert squid_ej(c, 0.5) == pytest.approx(c.ej_sum * (r - 1) / (r + 1), rel=1e-12)


def test_squid_ej_at_035_ratio():
    c = TunableCouplerParams(ej_sum=20000.0, ec=178.0, jj_ratio=2.23)
    r = 2.23
    oracle = math.sqrt(r * r + 1 + 2 * r * math.cos(0.7 * math.pi)) / (1 + r)
    assert squid_ej(c, 0.35) / c.ej_sum == pytest.approx(oracle, rel=1e-13)
    assert oracle == pytest.approx(0.567, abs=5e-4)


@given(st.floats(-3.0, 3.0))
def test_squid_ej_even_and_periodic(phi):
    c = TunableCouplerParams(ej_sum=17000.0, ec=150.0, jj_ratio=2.0)
    e = squid_ej(c, phi)
    assert squid_ej(c, -phi) == pytest.approx(e, rel=1e-12)
    assert squid_ej(c, phi + 1.0) == pytest.approx(e, rel=1e-12)


def test_flux_to_frequency_table_values(measured):
    c = measured.coupler
    assert flux_to_frequency(c, 0.0) == pytest.approx(3622.0, rel=0.02)
    assert flux_to_frequency(c, 0.35) == pytest.approx(2644.0, rel=0.02)


def test_flux_to_frequency_zero_ej_limit():
    c = TunableCouplerParams(ej_sum=10000.0, ec=200.0, jj_ratio=1.0)
    assert flux_to_frequency(c, 0.5) == pytest.approx(-200.0, abs=1e-9)


def test_flux_to_frequency_strictly_decreasing(measured):
    f = flux_to_frequency(measured.coupler, np.linspace(0, 0.5, 2001))
    assert np.all(np.diff(f) < 0)


def test_frequency_to_flux_endpoints(measured):
    c = measured.coupler
    assert frequency_to_flux(c, c.f_max) == pytest.approx(0.0, abs=1e-7)
    assert frequency_to_flux(c, c.f_min) == pytest.approx(0.5, abs=1e-12)


def test_frequency_to_flux_round_trip_against_bisection(measured, rng):
    c = measured.coupler
    targets = rng.uniform(c.f_min, c.f_max, 100)
    flux = frequency_to_flux(c, targets)
    assert np.all((flux >= 0) & (flux <= 0.5))
    np.testing.assert_allclose(flux_to_frequency(c, flux), targets, rtol=1e-9)
    oracle = np.array([frequency_to_flux_bisect(c, t) for t in targets])
    np.testing.assert_allclose(flux, oracle, atol=1e-9)


def test_frequency_to_flux_out_of_range_reports_index(measured):
    c = measured.coupler
    with pytest.raises(OutOfRange) as info:
        frequency_to_flux(c, np.array([3000.0, 3100.0, c.f_max + 5.0]))
    assert info.value.index == 2


def test_coupling_g_table_values(measured):
    f1, f2, fc = 3588.0, 3686.0, 3622.0
    assert abs(coupling_g(measured.rho_12, f1, f2)) == pytest.approx(3.96, abs=0.01)
    assert coupling_g(measured.rho_1c, f1, fc) == pytest.approx(96.2, abs=0.05)
    assert coupling_g(measured.rho_2c, f2, fc) == pytest.approx(83.9, abs=0.05)


def test_coupling_g_zero_and_sign():
    assert coupling_g(0.0, 4000.0, 5000.0) == 0.0
    assert coupling_g(-0.01, 4000.0, 4000.0) == pytest.approx(-40.0)


def test_hamiltonian_exactly_hermitian(measured):
    H = build_hamiltonian(measured, 3000.0)
    assert np.max(np.abs(H - H.conj().T)) == 0.0
    assert H.shape == (27, 27)


def test_uncoupled_eigenvalues_are_ladder_sums(uncoupled):
    fc = 3100.0
    w = np.linalg.eigvalsh(build_hamiltonian(uncoupled, fc))
    d = uncoupled
    expected = []
    for n1, n2, nc in d.labels():
        e = 0.0
        for n, f, eta in ((n1, d.q1.bare_frequency, d.q1.anharmonicity),
                          (n2, d.q2.bare_frequency, d.q2.anharmonicity),
                          (nc, fc, d.coupler.anharmonicity)):
            e += f * n + 0.5 * eta * n * (n - 1)
        expected.append(e)
    np.testing.assert_allclose(w, np.sort(expected), atol=1e-9)
    np.testing.assert_allclose(np.sort(bare_energies(d, fc)), np.sort(expected), atol=1e-9)


def test_resonant_two_level_splitting_is_2g():
    dev = small_device(f1=5000.0, f2=9000.0, rho_1c=0.004, f_max=6000.0)
    g = coupling_g(0.004, 5000.0, 5000.0)
    assert g / 5000.0 < 0.03
    w = np.linalg.eigvalsh(build_hamiltonian(dev, 5000.0))
    # single-excitation pair around 5000 MHz
    pair = np.sort(w[(w > 4500) & (w < 5500)])
    assert pair.size == 2
    assert (pair[1] - pair[0]) == pytest.approx(2 * g, rel=0.01)


def test_idle_detuning_at_bias_flux(measured):
    f_bias = flux_to_frequency(measured.coupler, measured.operating_point("bias_flux"))
    spec = track_spectrum(measured, [f_bias], f_bias)
    det = spec.energy("11,0")[0] - spec.energy("01,1")[0]
    assert det == pytest.approx(940.0, abs=20.0)


def test_dimension_cap(measured):
    with pytest.raises(DimensionOverflow):
        measured.with_levels(22)


def test_level_truncation_convergence(measured):
    fc = 3000.0
    lows = [np.linalg.eigvalsh(build_hamiltonian(measured.with_levels(n), fc))[:6] for n in (3, 4, 5)]
    d1 = np.max(np.abs(lows[1] - lows[0]))
    d2 = np.max(np.abs(lows[2] - lows[1]))
    assert d2 < d1


def test_label_index_ordering(measured):
    labels = measured.labels()
    assert [measured.index(lab) for lab in labels] == list(range(27))
    assert measured.index(HilbertLabel(1, 0, 0)) == 9
    assert measured.index(HilbertLabel(0, 1, 0)) == 3
    assert measured.index(HilbertLabel(0, 0, 1)) == 1
    with pytest.raises(ValueError):
        measured.index(HilbertLabel(3, 0, 0))


@pytest.mark.parametrize("text", ["11,0", "|11,0>", "1,1,0", " 11 , 0 "])
def test_label_parse(text):
    assert HilbertLabel.parse(text) == HilbertLabel(1, 1, 0)


def test_label_str_round_trip():
    for lab in COMPUTATIONAL:
        assert HilbertLabel.parse(str(lab)) == lab


def test_presets_round_trip(tmp_path, measured, sym, asym):
    for dev in (measured, sym, asym):
        path = tmp_path / f"{dev.name}.json"
        save_device(dev, path)
        again = load_device(path)
        assert again == dev
        assert again.operating_points == dev.operating_points


def test_comparison_presets_encode_stated_couplings(sym, asym):
    for dev, g12 in ((sym, -6.0), (asym, -7.0)):
        assert coupling_g(dev.rho_12, 4200.0, 4300.0) == pytest.approx(g12, abs=1e-6)
        assert abs(coupling_g(dev.rho_1c, 4200.0, 4200.0)) == pytest.approx(100.0, abs=1e-6)
        assert abs(coupling_g(dev.rho_2c, 4300.0, 4200.0)) == pytest.approx(100.0, abs=1e-6)
    assert sym.rho_2c > 0 and asym.rho_2c < 0


def test_invalid_preset_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"q1": {"bare_frequency": 4000, "anharmonicity": 200}}')
    with pytest.raises(ConfigError):
        load_device(path)
    with pytest.raises(ConfigError):
        load_device(tmp_path / "missing.json")


def test_large_rho12_warns(measured):
    with pytest.warns(UserWarning):
        measured.replace(rho_12=0.02)


def test_decoupled_zeroes_all_couplings(measured):
    d = decoupled(measured)
    assert (d.rho_12, d.rho_1c, d.rho_2c) == (0.0, 0.0, 0.0)


def test_labelled_eigensystem_matches_grid(measured):
    spec = track_spectrum(measured, np.linspace(2540, 3000, 11), 2540)
    w, _ = labelled_eigensystem(spec, spec.grid[4])
    np.testing.assert_allclose(w, spec.energies[4], atol=1e-9)
