"""Gate waveforms: Fourier-cosine envelopes and adiabatically weighted pulses.

An adiabatically weighted pulse (AWP) moves the coupler slowly where the
total adiabatic factor ``D`` is large and quickly where it is small::

    d omega_c / dt = (lam / D(omega_c)) * sin(2 pi t / t_cz)

Here ``omega_c`` is the angular coupler frequency (rad/ns) and ``D`` is in
ns**2 (see :mod:`adiabatic_cz.adiabaticity`).  This makes ``lam``
dimensionless: it is the peak value of the adiabaticity parameter
``D * |d omega_c/dt|`` reached at ``t = t_cz / 4``.

Integrating once gives ``G(omega_c(t)) = lam t_cz / (2 pi) (1 - cos(2 pi t / t_cz))``
with ``G(omega) = int D d omega``, which is inverted numerically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .adiabaticity import DFactorCurve, total_D
from .device import ANGULAR_PER_MHZ, COMPUTATIONAL, DeviceParams, TunableCouplerParams, frequency_to_flux
from .errors import ConstraintViolation, RangeExceeded
from .export import csv_text, fmt, read_csv

UNIT_FREQUENCY = "MHz"
UNIT_FLUX = "flux"
UNIT_AMPLITUDE = "amplitude"
UNITS = (UNIT_FREQUENCY, UNIT_FLUX, UNIT_AMPLITUDE)

ODD_SUM_TOL = 1e-12


@dataclass
class Waveform:
    """Uniformly sampled waveform on ``[0, (n-1) dt]``.

    During ``pad_before`` / ``pad_after`` (ns) the first / last sample value
    is held.  ``descriptor`` records how the waveform was made.
    """

    samples: np.ndarray
    dt: float
    unit: str = UNIT_FREQUENCY
    pad_before: float = 0.0
    pad_after: float = 0.0
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.atleast_1d(np.asarray(self.samples, dtype=float)).copy()
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("waveform needs a non-empty 1-D sample array")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.unit not in UNITS:
            raise ValueError(f"unknown unit {self.unit!r}; expected one of {UNITS}")
        if self.pad_before < 0 or self.pad_after < 0:
            raise ValueError("padding must be non-negative")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform samples must be finite")
        if self.unit == UNIT_FREQUENCY and np.any(self.samples <= 0):
            raise ValueError("frequency samples must be positive")

    @property
    def active_duration(self) -> float:
        return (self.samples.size - 1) * self.dt

    @property
    def duration(self) -> float:
        return self.pad_before + self.active_duration + self.pad_after

    @property
    def times(self) -> np.ndarray:
        """Sample times on the padded time axis."""
        return self.pad_before + self.dt * np.arange(self.samples.size)

    def value_at(self, t):
        """Linear interpolation, holding end values through the pads."""
        return np.interp(t, self.times, self.samples)

    def with_samples(self, samples, unit=None, **descriptor) -> "Waveform":
        desc = dict(self.descriptor)
        desc.update(descriptor)
        return Waveform(samples, self.dt, unit or self.unit, self.pad_before, self.pad_after, desc)

    def padded(self, before: float, after: float) -> "Waveform":
        return Waveform(self.samples, self.dt, self.unit, before, after, dict(self.descriptor))

    # io ------------------------------------------------------------------

    def to_csv(self, meta: dict | None = None) -> str:
        info = dict(meta or {})
        info.update(dt_ns=self.dt, pad_before_ns=self.pad_before, pad_after_ns=self.pad_after)
        rows = [(t, v, self.unit) for t, v in zip(self.times, self.samples)]
        return csv_text(["t_ns", "value", "unit"], rows, info)

    def save_csv(self, path, meta: dict | None = None) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(self.to_csv(meta))
        return path

    @classmethod
    def from_csv(cls, path_or_text, *, text: bool = False) -> "Waveform":
        meta, header, rows = read_csv(path_or_text, text=text)
        if header != ["t_ns", "value", "unit"]:
            raise ValueError(f"unexpected waveform header {header}")
        t = np.array([float(r[0]) for r in rows])
        values = np.array([float(r[1]) for r in rows])
        units = {r[2] for r in rows}
        if len(units) != 1:
            raise ValueError("mixed units in waveform file")
        if "dt_ns" in meta:
            dt = float(meta["dt_ns"])
        elif t.size > 1:
            dt = float(np.median(np.diff(t)))
        else:
            raise ValueError("cannot infer dt from a single sample")
        pad_before = float(meta.get("pad_before_ns", t[0]))
        pad_after = float(meta.get("pad_after_ns", 0.0))
        return cls(values, dt, units.pop(), pad_before, pad_after)

    def descriptor_json(self) -> str:
        desc = dict(self.descriptor)
        desc.update(dt=self.dt, unit=self.unit, pad_before=self.pad_before, pad_after=self.pad_after,
                    samples=int(self.samples.size))
        return json.dumps(_clean(desc), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(fmt(float(obj)))
    return obj


def _n_intervals(t_cz: float, dt: float) -> int:
    if not t_cz > 0:
        raise ValueError("t_cz must be positive")
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = int(round(t_cz / dt))
    if n < 1 or abs(n * dt - t_cz) > 1e-9 * max(t_cz, 1.0):
        raise ValueError(f"t_cz={t_cz} is not an integer multiple of dt={dt}")
    return n


def fourier_cosine(t_cz: float, coefficients, dt: float) -> Waveform:
    """Normalized envelope ``V(t) = sum_n a_n (1 - cos(2 pi n t / t_cz))``.

    ``coefficients[0]`` is ``a_1``.  The odd coefficients must sum to 0.5,
    which pins ``V(t_cz / 2) = 1``.
    """
    a = np.atleast_1d(np.asarray(coefficients, dtype=float))
    if a.size == 0:
        raise ConstraintViolation("at least one Fourier coefficient is required")
    odd_sum = float(np.sum(a[0::2]))
    if abs(odd_sum - 0.5) > ODD_SUM_TOL:
        raise ConstraintViolation(f"odd Fourier coefficients sum to {odd_sum!r}, not 0.5")
    n = _n_intervals(t_cz, dt)
    t = np.linspace(0.0, t_cz, n + 1)
    orders = np.arange(1, a.size + 1)
    V = (a[:, None] * (1.0 - np.cos(2.0 * np.pi * orders[:, None] * t[None, :] / t_cz))).sum(axis=0)
    V[0] = V[-1] = 0.0
    return Waveform(V, t_cz / n, UNIT_AMPLITUDE, descriptor={
        "type": "fourier_cosine", "t_cz": t_cz, "coefficients": a.tolist()})


def scale_envelope(envelope: Waveform, idle: float, excursion: float, *, domain: str = "frequency",
                   coupler: TunableCouplerParams | None = None) -> Waveform:
    """Map a normalized envelope onto the coupler.

    ``domain="frequency"``: ``f(t) = idle + excursion * V(t)``.
    ``domain="flux"``: the flux moves linearly with ``V`` from the idle bias
    towards zero flux, reaching the frequency ``idle + excursion`` at
    ``V = 1``; the result is returned in MHz.
    """
    if envelope.unit != UNIT_AMPLITUDE:
        raise ValueError("envelope must be a normalized amplitude waveform")
    V = envelope.samples
    if domain == "frequency":
        freq = idle + excursion * V
    elif domain == "flux":
        if coupler is None:
            raise ValueError("flux-domain scaling needs the coupler parameters")
        from .device import flux_to_frequency

        phi0 = frequency_to_flux(coupler, idle)
        phi1 = frequency_to_flux(coupler, idle + excursion)
        freq = flux_to_frequency(coupler, phi0 + (phi1 - phi0) * V)
    else:
        raise ValueError(f"unknown domain {domain!r}")
    return envelope.with_samples(np.asarray(freq, dtype=float), UNIT_FREQUENCY, idle=idle,
                                 excursion=excursion, domain=domain)


def cosine_pulse(t_cz: float, idle: float, target: float, dt: float, pad: float = 0.0, **kw) -> Waveform:
    """Plain ``a_1 = 0.5`` cosine from ``idle`` to ``target`` and back (MHz)."""
    env = fourier_cosine(t_cz, [0.5], dt)
    return scale_envelope(env, idle, target - idle, **kw).padded(pad, pad)


# ---------------------------------------------------------------------------
# adiabatically weighted pulses


@dataclass
class AwpSpec:
    """Inputs of :func:`awp_generate`.

    ``lam`` is the dimensionless peak adiabaticity; ``d_curve`` supplies the
    total adiabatic factor on an ascending coupler-frequency grid that
    covers ``start_freq`` and everything the pulse visits.
    """

    t_cz: float
    lam: float
    d_curve: DFactorCurve
    start_freq: float

    def __post_init__(self):
        if not self.t_cz > 0:
            raise ValueError("t_cz must be positive")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")


def bridge_gaps(grid, values) -> np.ndarray:
    """Fill NaN / non-positive entries by linear interpolation in ``log D``."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    good = np.isfinite(values) & (values > 0)
    if good.sum() < 2:
        raise ValueError("D curve has fewer than two usable points")
    if good.all():
        return values.copy()
    out = values.copy()
    out[~good] = np.exp(np.interp(grid[~good], grid[good], np.log(values[good])))
    return out


def integrate_G(grid, D) -> np.ndarray:
    """Cumulative trapezoid ``G(f) = ANGULAR_PER_MHZ * int D df`` in ns."""
    D = bridge_gaps(grid, D)
    steps = 0.5 * (D[1:] + D[:-1]) * np.diff(grid)
    return ANGULAR_PER_MHZ * np.concatenate([[0.0], np.cumsum(steps)])


def _total_on(device, freqs, anchor, computational):
    grid = np.union1d(freqs, [anchor])
    curve = total_D(device, grid, anchor, computational)
    return np.interp(freqs, curve.grid, bridge_gaps(curve.grid, curve.total))


def refined_total_D(device: DeviceParams, grid, anchor: float, rtol: float = 1e-6, max_rounds: int = 10,
                    computational=COMPUTATIONAL) -> DFactorCurve:
    """Total D on ``grid``, adaptively refined where the trapezoid rule is poor.

    Each round evaluates D at interval midpoints and keeps those where the
    two-panel trapezoid differs from the one-panel value by more than the
    interval's share of ``rtol * G``.  Stops when nothing is flagged or the
    integral moves by less than ``rtol`` relative.
    """
    grid = np.unique(np.asarray(grid, dtype=float))
    D = _total_on(device, grid, anchor, computational)
    span = grid[-1] - grid[0]
    for _ in range(max_rounds):
        width = np.diff(grid)
        mids = grid[:-1] + 0.5 * width
        Dm = _total_on(device, mids, anchor, computational)
        coarse = 0.5 * (D[1:] + D[:-1]) * width
        fine = 0.25 * (D[1:] + 2.0 * Dm + D[:-1]) * width
        total = np.sum(fine)
        flagged = np.abs(fine - coarse) > rtol * total * width / span
        if not np.any(flagged):
            break
        order = np.argsort(np.concatenate([grid, mids[flagged]]))
        grid = np.concatenate([grid, mids[flagged]])[order]
        D = np.concatenate([D, Dm[flagged]])[order]
        if abs(np.sum(fine - coarse)) <= rtol * abs(total):
            break
    return total_D(device, grid, anchor, computational)


def awp_generate(spec: AwpSpec, dt: float) -> Waveform:
    """Coupler-frequency trajectory (MHz) of an adiabatically weighted pulse."""
    n = _n_intervals(spec.t_cz, dt)
    grid = np.asarray(spec.d_curve.grid, dtype=float)
    D = bridge_gaps(grid, spec.d_curve.total)
    f0 = float(spec.start_freq)
    if not grid[0] <= f0 < grid[-1]:
        raise ValueError(f"start frequency {f0} not inside the D grid [{grid[0]}, {grid[-1]}]")
    keep = grid > f0
    D0 = float(np.exp(np.interp(f0, grid, np.log(D))))
    g = np.concatenate([[f0], grid[keep]])
    G = integrate_G(g, np.concatenate([[D0], D[keep]]))
    if np.any(np.diff(G) <= 0):
        raise ValueError("integrated D is not strictly increasing")
    t = np.linspace(0.0, spec.t_cz, n + 1)
    target = spec.lam * spec.t_cz / (2.0 * np.pi) * (1.0 - np.cos(2.0 * np.pi * t / spec.t_cz))
    if target.max() > G[-1] * (1.0 + 1e-12):
        lam_max = 2.0 * np.pi * G[-1] / (2.0 * spec.t_cz)
        raise RangeExceeded(
            f"lambda={spec.lam:.6g} needs G={target.max():.6g} ns but the D grid only integrates to "
            f"{G[-1]:.6g} ns (largest admissible lambda {lam_max:.6g})"
        )
    inverse = PchipInterpolator(G, g, extrapolate=False)
    freq = inverse(np.minimum(target, G[-1]))
    freq[0] = freq[-1] = f0
    return Waveform(freq, spec.t_cz / n, UNIT_FREQUENCY, descriptor={
        "type": "awp", "t_cz": spec.t_cz, "lambda": spec.lam, "start_freq": f0})


def awp_lambda_max(spec_or_curve, t_cz: float, start_freq: float) -> float:
    """Largest ``lam`` whose trajectory stays inside the D grid."""
    curve = spec_or_curve.d_curve if isinstance(spec_or_curve, AwpSpec) else spec_or_curve
    grid = np.asarray(curve.grid, dtype=float)
    D = bridge_gaps(grid, curve.total)
    keep = grid > start_freq
    D0 = float(np.exp(np.interp(start_freq, grid, np.log(D))))
    G = integrate_G(np.concatenate([[start_freq], grid[keep]]), np.concatenate([[D0], D[keep]]))
    return 2.0 * np.pi * G[-1] / (2.0 * t_cz)


def awp_lambda_for_peak(curve: DFactorCurve, t_cz: float, start_freq: float, peak_freq: float) -> float:
    """``lam`` whose AWP trajectory turns around exactly at ``peak_freq``."""
    grid = np.asarray(curve.grid, dtype=float)
    D = bridge_gaps(grid, curve.total)
    g = np.concatenate([[start_freq], grid[(grid > start_freq) & (grid < peak_freq)], [peak_freq]])
    logD = np.interp(g, grid, np.log(D))
    G = integrate_G(g, np.exp(logD))
    return math.pi * G[-1] / t_cz


def waveform_freq_to_flux(w: Waveform, coupler: TunableCouplerParams) -> Waveform:
    """Pointwise conversion of a frequency waveform to SQUID flux."""
    if w.unit != UNIT_FREQUENCY:
        raise ValueError("waveform must be in coupler-frequency units")
    flux = np.atleast_1d(frequency_to_flux(coupler, w.samples))
    return w.with_samples(flux, UNIT_FLUX)


def waveform_flux_to_freq(w: Waveform, coupler: TunableCouplerParams) -> Waveform:
    from .device import flux_to_frequency

    if w.unit != UNIT_FLUX:
        raise ValueError("waveform must be in flux units")
    return w.with_samples(np.atleast_1d(flux_to_frequency(coupler, w.samples)), UNIT_FREQUENCY)


def slepian_like_speed_profile(w: Waveform) -> np.ndarray:
    """Sampled ``d f_c / dt`` (MHz/ns): central differences, one-sided ends."""
    if w.unit != UNIT_FREQUENCY:
        raise ValueError("speed profile needs a frequency waveform")
    if w.samples.size < 2:
        return np.zeros(w.samples.size)
    return np.gradient(w.samples, w.dt, edge_order=1)
