"""Adiabatic factors along the coupler-frequency trajectory.

For tracked eigenstates ``i`` and ``k``::

    D_ik = |<i| dH/dw_c |k>| / (E_k - E_i)**2

with energies in angular units (rad/ns), so ``D_ik * |dw_c/dt|`` is
dimensionless when ``w_c`` is in rad/ns and ``t`` in ns.  D values are
therefore stored in ns**2; :func:`adiabaticity_parameter` applies the
conversion for a sweep rate given in MHz/ns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .device import ANGULAR_PER_MHZ, COMPUTATIONAL, DeviceParams, HilbertLabel, build_hamiltonian
from .spectrum import TrackedSpectrum, track_spectrum

SINGULAR_GAP = 1e-6  # MHz


def dH_domega(device: DeviceParams, coupler_freq: float, h: float = 0.1) -> np.ndarray:
    """Central finite difference of the Hamiltonian in the coupler frequency."""
    h = min(h, 0.5 * coupler_freq)
    up = build_hamiltonian(device, coupler_freq + h)
    down = build_hamiltonian(device, coupler_freq - h)
    d = (up - down) / (2.0 * h)
    return 0.5 * (d + d.conj().T)


def pair_factors(energies, vectors, dH, source: int, scale: float = 1.0):
    """``|<i|dH|k>| / (scale * (E_k - E_i))**2`` for every ``i`` against ``k = source``.

    Returns ``(D, gap_mask)``; entries with ``|E_k - E_i| < SINGULAR_GAP``
    are NaN and flagged in the mask.  ``D[source]`` is zero.
    """
    vk = vectors[:, source]
    elem = np.abs(vectors.conj().T @ (dH @ vk))
    gap = energies[source] - energies
    singular = np.abs(gap) < SINGULAR_GAP
    singular[source] = False
    with np.errstate(divide="ignore", invalid="ignore"):
        D = elem / (scale * gap) ** 2
    D[source] = 0.0
    D[singular] = np.nan
    return D, singular


@dataclass
class DFactorCurve:
    """``pair[g, s, i]`` is D_{i, sources[s]} at ``grid[g]`` (ns**2).

    ``per_state[g, s]`` sums over partners; ``total[g]`` sums over sources.
    NaN marks grid points excluded for a near-degenerate gap.
    """

    grid: np.ndarray
    sources: list
    partners: list
    pair: np.ndarray
    per_state: np.ndarray
    total: np.ndarray
    gaps: np.ndarray

    def component(self, source, partner) -> np.ndarray:
        s = self.sources.index(_label(source))
        return self.pair[:, s, self.partners.index(_label(partner))]

    def state_sum(self, source) -> np.ndarray:
        return self.per_state[:, self.sources.index(_label(source))]


def _label(x) -> HilbertLabel:
    return HilbertLabel.parse(x) if isinstance(x, str) else HilbertLabel(*x)


def _curve(spectrum: TrackedSpectrum, sources, partner_filter=None, h=0.1) -> DFactorCurve:
    sources = [_label(s) for s in sources]
    labels = spectrum.labels
    src_cols = [spectrum.column(s) for s in sources]
    n_grid = spectrum.grid.size
    pair = np.zeros((n_grid, len(sources), len(labels)))
    gaps = np.zeros((n_grid, len(sources), len(labels)), dtype=bool)
    for g, f in enumerate(spectrum.grid):
        dH = dH_domega(spectrum.device, f, h)
        for s, col in enumerate(src_cols):
            pair[g, s], gaps[g, s] = pair_factors(
                spectrum.energies[g], spectrum.vectors[g], dH, col, ANGULAR_PER_MHZ
            )
    if partner_filter is not None:
        keep = np.array([[partner_filter(src, lab) for lab in labels] for src in sources])
        pair = np.where(keep[np.newaxis], pair, 0.0)
        gaps &= keep[np.newaxis]
    per_state = pair.sum(axis=2)  # NaN propagates from singular gaps
    total = per_state.sum(axis=1)
    return DFactorCurve(spectrum.grid, sources, list(labels), pair, per_state, total, gaps.any(axis=(1, 2)))


def same_manifold(source: HilbertLabel, partner: HilbertLabel) -> bool:
    return sum(source) == sum(partner)


def adiabatic_factor(
    device: DeviceParams,
    grid,
    source,
    anchor: float,
    spectrum: TrackedSpectrum | None = None,
    manifold_only: bool = False,
) -> DFactorCurve:
    """D_ik for one tracked source state ``k`` against every partner ``i``."""
    if spectrum is None:
        spectrum = track_spectrum(device, grid, anchor)
    return _curve(spectrum, [source], same_manifold if manifold_only else None)


def total_D(
    device: DeviceParams,
    grid,
    anchor: float,
    computational=COMPUTATIONAL,
    spectrum: TrackedSpectrum | None = None,
    manifold_only: bool = False,
) -> DFactorCurve:
    """Sum of the per-state factors D_k over the computational states."""
    if spectrum is None:
        spectrum = track_spectrum(device, grid, anchor)
    return _curve(spectrum, list(computational), same_manifold if manifold_only else None)


def adiabaticity_parameter(D, sweep_rate_mhz_per_ns):
    """Dimensionless ``D * |dw_c/dt|`` for a sweep rate given in MHz/ns."""
    return np.asarray(D) * ANGULAR_PER_MHZ * np.abs(sweep_rate_mhz_per_ns)
