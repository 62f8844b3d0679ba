"""Dressed spectra along coupler-frequency sweeps.

States are followed through avoided crossings by maximum-overlap
continuation from an anchor point where every eigenvector is close to a
bare product state.  Wherever a grid step is too coarse to resolve a
crossing (best overlap-squared below 0.5) the step is bisected.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment

from .device import DeviceParams, HilbertLabel, build_hamiltonian
from .errors import (
    DegenerateFlat,
    DiagonalizationError,
    NoSignChange,
    TrackingAmbiguous,
    TrackingDegeneracy,
)

OVERLAP_THRESHOLD = 0.5
MAX_DEPTH = 12
DEGENERACY_GAP = 1e-9

ZETA_LABELS = (
    HilbertLabel(1, 1, 0),
    HilbertLabel(1, 0, 0),
    HilbertLabel(0, 1, 0),
    HilbertLabel(0, 0, 0),
)


def diagonalize(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of Hermitian ``H``.

    The phase of every eigenvector is fixed so that its largest-magnitude
    component is real and positive.
    """
    H = np.asarray(H)
    try:
        w, v = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise DiagonalizationError(f"Hermitian eigensolver did not converge: {exc}") from exc
    idx = np.argmax(np.abs(v), axis=0)
    pivots = v[idx, np.arange(v.shape[1])]
    v = v * (np.abs(pivots) / pivots)[np.newaxis, :]
    if not np.iscomplexobj(H):
        v = v.real
    return w, v


def _align_degenerate(w, v, reference):
    """Rotate eigenvectors inside degenerate blocks towards ``reference``."""
    gaps = np.diff(w) < DEGENERACY_GAP
    if not np.any(gaps):
        return v
    warnings.warn("degenerate eigenvalues encountered while tracking", TrackingDegeneracy, stacklevel=4)
    v = v.copy()
    start = 0
    for k in range(1, len(w) + 1):
        if k == len(w) or not gaps[k - 1]:
            m = k - start
            if m > 1:
                block = v[:, start:k]
                proj = block.conj().T @ reference
                cols = np.argsort(-np.linalg.norm(proj, axis=0))[:m]
                # polar factor of the projection: closest unitary frame
                u, _, vh = np.linalg.svd(proj[:, cols])
                v[:, start:k] = block @ (u @ vh)
            start = k
    return v


@dataclass
class TrackedSpectrum:
    """Adiabatically labeled eigensystem on an ascending coupler grid.

    ``energies[g, j]`` and ``vectors[g, :, j]`` belong to ``labels[j]``.
    """

    grid: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray
    labels: list
    anchor: float
    device: DeviceParams = field(repr=False)
    min_overlap: np.ndarray = field(default=None, repr=False)

    def column(self, label) -> int:
        if isinstance(label, str):
            label = HilbertLabel.parse(label)
        return self.labels.index(HilbertLabel(*label))

    def energy(self, label) -> np.ndarray:
        return self.energies[:, self.column(label)]

    def vector(self, label) -> np.ndarray:
        return self.vectors[:, :, self.column(label)]

    def zeta_curve(self) -> np.ndarray:
        e11, e10, e01, e00 = (self.energy(lab) for lab in ZETA_LABELS)
        return e11 - e10 - e01 + e00

    def transition(self, upper, lower) -> np.ndarray:
        return self.energy(upper) - self.energy(lower)


class _Tracker:
    """Stateful continuation helper bound to one device."""

    def __init__(self, device: DeviceParams, threshold=OVERLAP_THRESHOLD, max_depth=MAX_DEPTH):
        self.device = device
        self.threshold = threshold
        self.max_depth = max_depth

    def eig(self, f):
        return diagonalize(build_hamiltonian(self.device, f))

    def anchor_state(self, f):
        w, v = self.eig(f)
        weights = np.abs(v) ** 2  # rows: bare states, cols: eigenvectors
        rows, cols = linear_sum_assignment(-weights)
        best = weights[rows, cols]
        if np.min(best) <= self.threshold:
            bad = int(rows[np.argmin(best)])
            raise TrackingAmbiguous(
                f"state {self.device.labels()[bad]} has overlap {np.min(best):.3f} with its bare "
                f"state at anchor {f} MHz",
                location=f,
            )
        perm = np.empty_like(cols)
        perm[rows] = cols
        return w[perm], v[:, perm]

    def step(self, f_from, vec_from, f_to, depth=0):
        """Energies/vectors at ``f_to`` ordered consistently with ``vec_from``."""
        w, v = self.eig(f_to)
        v = _align_degenerate(w, v, vec_from)
        overlap = np.abs(vec_from.conj().T @ v) ** 2
        rows, cols = linear_sum_assignment(-overlap)
        best = overlap[rows, cols]
        if np.min(best) > self.threshold:
            perm = np.empty_like(cols)
            perm[rows] = cols
            return w[perm], v[:, perm], float(np.min(best))
        if depth >= self.max_depth:
            raise TrackingAmbiguous(
                f"adiabatic continuation unresolved between {f_from:.9g} and {f_to:.9g} MHz "
                f"(best overlap {np.min(best):.3f}) after {depth} bisections",
                location=(f_from, f_to),
            )
        mid = 0.5 * (f_from + f_to)
        _, v_mid, _ = self.step(f_from, vec_from, mid, depth + 1)
        return self.step(mid, v_mid, f_to, depth + 1)


def track_spectrum(
    device: DeviceParams,
    grid,
    anchor: float,
    threshold: float = OVERLAP_THRESHOLD,
    max_depth: int = MAX_DEPTH,
) -> TrackedSpectrum:
    """Label dressed states at ``anchor`` and follow them across ``grid``."""
    grid = np.unique(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("grid is empty")
    if not grid[0] <= anchor <= grid[-1]:
        raise ValueError(f"anchor {anchor} outside grid range [{grid[0]}, {grid[-1]}]")
    tracker = _Tracker(device, threshold, max_depth)
    dim = device.dimension
    energies = np.empty((grid.size, dim))
    vectors = None
    min_overlap = np.ones(grid.size)

    w0, v0 = tracker.anchor_state(anchor)
    vectors = np.empty((grid.size,) + v0.shape, dtype=v0.dtype)
    split = int(np.searchsorted(grid, anchor))
    for indices in (range(split, grid.size), range(split - 1, -1, -1)):
        f_prev, v_prev = anchor, v0
        for g in indices:
            w, v, ov = tracker.step(f_prev, v_prev, grid[g])
            energies[g], vectors[g], min_overlap[g] = w, v, ov
            f_prev, v_prev = grid[g], v
    return TrackedSpectrum(grid, energies, vectors, device.labels(), float(anchor), device, min_overlap)


def labelled_eigensystem(spectrum: TrackedSpectrum, f: float):
    """Energies and vectors at an arbitrary ``f`` by continuation from the
    nearest tracked grid point."""
    g = int(np.argmin(np.abs(spectrum.grid - f)))
    tracker = _Tracker(spectrum.device)
    w, v, _ = tracker.step(spectrum.grid[g], spectrum.vectors[g], f)
    return w, v


def zeta(spectrum: TrackedSpectrum, at: float) -> float:
    """Conditional frequency shift E11 - E10 - E01 + E00 (MHz) at ``at``."""
    hit = np.flatnonzero(np.isclose(spectrum.grid, at, rtol=0, atol=1e-9))
    if hit.size:
        w = spectrum.energies[hit[0]]
    else:
        w, _ = labelled_eigensystem(spectrum, at)
    c = [spectrum.column(lab) for lab in ZETA_LABELS]
    return float(w[c[0]] - w[c[1]] - w[c[2]] + w[c[3]])


def tracking_grid(freqs, anchor: float, max_step: float = 5.0) -> np.ndarray:
    """``freqs`` plus the anchor, filled in so no step exceeds ``max_step`` MHz."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    lo, hi = min(freqs.min(), anchor), max(freqs.max(), anchor)
    path = np.linspace(lo, hi, int(math.ceil((hi - lo) / max_step)) + 1)
    return np.union1d(freqs, np.union1d(path, [anchor]))


def zeta_at(device: DeviceParams, freqs, anchor: float, max_step: float = 5.0) -> np.ndarray:
    """ζ on arbitrary frequencies, labels anchored at ``anchor``.

    Labels are carried along a path from ``anchor`` whose steps never
    exceed ``max_step`` MHz, so sparse requests far from the anchor still
    follow the adiabatic branch through intervening crossings.
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    spec = track_spectrum(device, tracking_grid(freqs, anchor, max_step), anchor)
    idx = np.searchsorted(spec.grid, freqs)
    return spec.zeta_curve()[idx]


def find_zz_zero(
    device: DeviceParams,
    bracket: tuple[float, float],
    anchor: float | None = None,
    samples: int = 41,
) -> float:
    """Coupler frequency inside ``bracket`` where ζ vanishes (|ζ| < 1 kHz).

    Labels are anchored at ``anchor`` (default: bracket midpoint).  If ζ
    changes sign more than once on the bracket the lowest root is returned.
    """
    lo, hi = sorted(float(b) for b in bracket)
    anchor = 0.5 * (lo + hi) if anchor is None else anchor
    grid = np.linspace(lo, hi, samples)
    spec = track_spectrum(device, np.union1d(grid, [anchor]) if lo <= anchor <= hi else grid, anchor)
    z = spec.zeta_curve()
    if np.max(np.abs(z)) < 1e-9:
        raise DegenerateFlat("ζ vanishes identically on the bracket (decoupled device?)")
    sign_changes = np.flatnonzero(np.sign(z[:-1]) * np.sign(z[1:]) <= 0)
    if sign_changes.size == 0:
        raise NoSignChange(f"ζ does not change sign on [{lo}, {hi}] MHz")
    i = int(sign_changes[0])
    a, b = spec.grid[i], spec.grid[i + 1]
    if z[i] == 0.0:
        return float(a)

    def f(x):
        return zeta(spec, x)

    return float(brentq(f, a, b, xtol=1e-9, rtol=1e-14))


@dataclass
class HybridizationCurve:
    grid: np.ndarray
    weights: np.ndarray  # (n_grid, n_bare)
    labels: list
    state: HilbertLabel

    def weight(self, label) -> np.ndarray:
        if isinstance(label, str):
            label = HilbertLabel.parse(label)
        return self.weights[:, self.labels.index(HilbertLabel(*label))]


def hybridization(spectrum: TrackedSpectrum, state) -> HybridizationCurve:
    """Bare-state weights of the tracked dressed ``state`` along the sweep."""
    if isinstance(state, str):
        state = HilbertLabel.parse(state)
    vec = spectrum.vector(state)
    return HybridizationCurve(spectrum.grid, np.abs(vec) ** 2, spectrum.labels, HilbertLabel(*state))


def manifold(spectrum: TrackedSpectrum, excitations: int) -> list:
    return [lab for lab in spectrum.labels if sum(lab) == excitations]
