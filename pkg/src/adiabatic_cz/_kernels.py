"""Hot loops of the time-domain simulation.

Two interchangeable implementations are provided: numba-compiled kernels
and a pure-numpy fallback.  The numba path is used when numba imports and
the environment variable ``ADIABATIC_CZ_JIT`` is not set to ``0``.
"""

from __future__ import annotations

import os

import numpy as np

_SQRT3 = np.sqrt(3.0)


def _jit_requested() -> bool:
    return os.environ.get("ADIABATIC_CZ_JIT", "1").strip().lower() not in ("0", "false", "no", "off")


try:  # pragma: no cover - exercised implicitly by whichever path is active
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


# --------------------------------------------------------------------------
# pure numpy


def _hamiltonian(static, number_c, coupling_c, f):
    return static + f * number_c + np.sqrt(f) * coupling_c


def magnus4_propagate_numpy(static, number_c, coupling_c, f_gauss, dt, scale):
    """Product of fourth-order Magnus steps.

    ``f_gauss[n] = (f(t_n + c1 dt), f(t_n + c2 dt))`` at the two Gauss
    nodes of step ``n``.  ``scale`` converts the Hamiltonian to rad/ns.
    """
    dim = static.shape[0]
    U = np.eye(dim, dtype=np.complex128)
    c = _SQRT3 * dt * dt / 12.0
    for n in range(f_gauss.shape[0]):
        h1 = scale * _hamiltonian(static, number_c, coupling_c, f_gauss[n, 0])
        h2 = scale * _hamiltonian(static, number_c, coupling_c, f_gauss[n, 1])
        K = (0.5 * dt) * (h1 + h2) - 1j * c * (h2 @ h1 - h1 @ h2)
        w, v = np.linalg.eigh(K)
        U = (v * np.exp(-1j * w)) @ (v.conj().T @ U)
    return U


def cycle_populations_numpy(cycle, psi0, n_cycles):
    """``|C^N psi0|^2`` for ``N = 0..n_cycles``; row ``N`` of the result."""
    out = np.empty((n_cycles + 1, psi0.shape[0]))
    psi = psi0.astype(np.complex128)
    out[0] = np.abs(psi) ** 2
    for n in range(1, n_cycles + 1):
        psi = cycle @ psi
        out[n] = np.abs(psi) ** 2
    return out


# --------------------------------------------------------------------------
# numba

if HAVE_NUMBA:

    @njit(cache=True)
    def magnus4_propagate_numba(static, number_c, coupling_c, f_gauss, dt, scale):
        dim = static.shape[0]
        U = np.eye(dim, dtype=np.complex128)
        c = np.sqrt(3.0) * dt * dt / 12.0
        h1 = np.empty((dim, dim), dtype=np.complex128)
        h2 = np.empty((dim, dim), dtype=np.complex128)
        for n in range(f_gauss.shape[0]):
            fa = f_gauss[n, 0]
            fb = f_gauss[n, 1]
            sa = np.sqrt(fa)
            sb = np.sqrt(fb)
            for i in range(dim):
                for j in range(dim):
                    h1[i, j] = scale * (static[i, j] + fa * number_c[i, j] + sa * coupling_c[i, j])
                    h2[i, j] = scale * (static[i, j] + fb * number_c[i, j] + sb * coupling_c[i, j])
            K = (0.5 * dt) * (h1 + h2) - 1j * c * (h2 @ h1 - h1 @ h2)
            w, v = np.linalg.eigh(K)
            phases = np.exp(-1j * w)
            tmp = v.conj().T @ U
            for i in range(dim):
                for j in range(dim):
                    tmp[i, j] *= phases[i]
            U = v @ tmp
        return U

    @njit(cache=True)
    def cycle_populations_numba(cycle, psi0, n_cycles):
        dim = psi0.shape[0]
        out = np.empty((n_cycles + 1, dim))
        psi = psi0.astype(np.complex128)
        for i in range(dim):
            out[0, i] = abs(psi[i]) ** 2
        for n in range(1, n_cycles + 1):
            psi = cycle @ psi
            for i in range(dim):
                out[n, i] = psi[i].real ** 2 + psi[i].imag ** 2
        return out


def use_jit() -> bool:
    """True when the compiled kernels are active."""
    return HAVE_NUMBA and _jit_requested()


def magnus4_propagate(static, number_c, coupling_c, f_gauss, dt, scale):
    args = (
        np.ascontiguousarray(static, dtype=np.complex128),
        np.ascontiguousarray(number_c, dtype=np.complex128),
        np.ascontiguousarray(coupling_c, dtype=np.complex128),
        np.ascontiguousarray(f_gauss, dtype=np.float64),
        float(dt),
        float(scale),
    )
    if use_jit():
        return magnus4_propagate_numba(*args)
    return magnus4_propagate_numpy(*args)


def cycle_populations(cycle, psi0, n_cycles: int):
    cycle = np.ascontiguousarray(cycle, dtype=np.complex128)
    psi0 = np.ascontiguousarray(psi0, dtype=np.complex128)
    if use_jit():
        return cycle_populations_numba(cycle, psi0, int(n_cycles))
    return cycle_populations_numpy(cycle, psi0, int(n_cycles))
