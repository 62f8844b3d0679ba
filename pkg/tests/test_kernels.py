import math

import numpy as np
import pytest

from adiabatic_cz import _kernels
from adiabatic_cz.device import ANGULAR_PER_MHZ

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def _random_problem(rng, dim=6, steps=40):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    static = (a + a.conj().T) * 50
    number_c = np.diag(rng.integers(0, 3, dim)).astype(complex)
    b = rng.normal(size=(dim, dim))
    coupling_c = (b + b.T) * 2.0 + 0j
    f_gauss = 3000 + 500 * rng.random((steps, 2))
    return static, number_c, coupling_c, f_gauss


@needs_numba
def test_magnus_numba_matches_numpy(rng):
    static, nc, cc, fg = _random_problem(rng)
    a = _kernels.magnus4_propagate_numba(static, nc, cc, fg, 0.02, ANGULAR_PER_MHZ)
    b = _kernels.magnus4_propagate_numpy(static, nc, cc, fg, 0.02, ANGULAR_PER_MHZ)
    assert np.max(np.abs(a - b)) < 1e-10


@needs_numba
def test_cycle_populations_numba_matches_numpy(rng):
    q, _ = np.linalg.qr(rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5)))
    psi = np.zeros(5, complex)
    psi[2] = 1
    a = _kernels.cycle_populations_numba(q, psi, 30)
    b = _kernels.cycle_populations_numpy(q, psi, 30)
    assert np.max(np.abs(a - b)) < 1e-12
    assert np.allclose(a.sum(axis=1), 1.0)


def test_env_flag_disables_jit(monkeypatch):
    monkeypatch.setenv("ADIABATIC_CZ_JIT", "0")
    assert not _kernels.use_jit()
    monkeypatch.setenv("ADIABATIC_CZ_JIT", "1")
    assert _kernels.use_jit() == _kernels.HAVE_NUMBA


@pytest.mark.parametrize("flag", ["0", "1"])
def test_two_level_rabi_closed_form(monkeypatch, flag):
    monkeypatch.setenv("ADIABATIC_CZ_JIT", flag)
    g, delta, T, n = 7.0, 30.0, 20.0, 2000
    static = np.array([[0, g], [g, delta]], dtype=complex)
    zero = np.zeros((2, 2), complex)
    U = _kernels.magnus4_propagate(static, zero, zero, np.full((n, 2), 1.0), T / n, ANGULAR_PER_MHZ)
    omega = math.sqrt(delta**2 + 4 * g**2)
    expected = 4 * g**2 / omega**2 * math.sin(ANGULAR_PER_MHZ * omega * T / 2) ** 2
    assert abs(abs(U[1, 0]) ** 2 - expected) < 1e-6
    assert np.allclose(U.conj().T @ U, np.eye(2), atol=1e-12)


def test_zero_steps_is_identity():
    s = np.diag([1.0, 2.0]).astype(complex)
    U = _kernels.magnus4_propagate(s, s * 0, s * 0, np.zeros((0, 2)), 0.1, ANGULAR_PER_MHZ)
    assert np.array_equal(U, np.eye(2))
