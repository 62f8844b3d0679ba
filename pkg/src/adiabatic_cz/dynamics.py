"""Time-domain evolution under coupler pulses and leakage amplification.

Frame convention
----------------
Phases are measured against the idle dressed energies: for a dressed
computational state ``|k>`` with idle energy ``E_k`` (MHz) and a pulse of
total duration ``T`` the accumulated phase is

    phi_k = -arg <k| U |k> - 2 pi E_k T

so a stationary state has ``phi_k = 0`` and a state whose energy is raised
during the pulse accumulates a positive phase.  With this sign the
conditional phase ``phi_11 - phi_10 - phi_01 + phi_00`` equals
``2 pi int zeta dt`` in the adiabatic limit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.signal import find_peaks

from . import _kernels
from .device import ANGULAR_PER_MHZ, COMPUTATIONAL, DeviceParams, HilbertLabel, build_hamiltonian
from .errors import (
    ConvergenceFailure,
    FitDegenerate,
    HighLeakage,
    InsufficientPeaks,
    OutOfRange,
    Unreachable,
)
from .pulses import UNIT_AMPLITUDE, UNIT_FREQUENCY, AwpSpec, Waveform, awp_generate, awp_lambda_max, scale_envelope
from .spectrum import _Tracker, track_spectrum

DEFAULT_DT = 0.02  # ns
POPULATION_TOL = 1e-6
MIN_DT = 1e-3
LEAKAGE_WARNING = 1e-2
_GAUSS = (0.5 - math.sqrt(3.0) / 6.0, 0.5 + math.sqrt(3.0) / 6.0)


@dataclass
class IdleBasis:
    """Dressed eigenbasis at the idle point, columns ordered by ``labels``."""

    frequency: float
    energies: np.ndarray
    vectors: np.ndarray
    labels: list

    def column(self, label) -> int:
        if isinstance(label, str):
            label = HilbertLabel.parse(label)
        return self.labels.index(HilbertLabel(*label))

    def state(self, label) -> np.ndarray:
        return self.vectors[:, self.column(label)].astype(complex)


def idle_basis(device: DeviceParams, frequency: float) -> IdleBasis:
    w, v = _Tracker(device).anchor_state(frequency)
    return IdleBasis(float(frequency), w, v, device.labels())


def bare_idle_for_dressed(device: DeviceParams, dressed: float, bracket=None) -> float:
    """Bare coupler frequency at which the dressed coupler transition
    ``E(00,1) - E(00,0)`` equals ``dressed`` (MHz)."""
    lo, hi = bracket or (device.coupler.f_min, device.coupler.f_max)

    def excess(f):
        b = idle_basis(device, f)
        return b.energies[b.column((0, 0, 1))] - b.energies[b.column((0, 0, 0))] - dressed

    return brentq(excess, lo, hi, xtol=1e-9)


def resolve_idle(device: DeviceParams, convention: str = "bare", key: str = "idle_frequency") -> float:
    """Bare starting frequency of simulation pulses.

    ``"bare"`` uses the stored idle value as a bare frequency; ``"dressed"``
    treats it as the dressed coupler transition and converts it.
    """
    value = device.operating_point(key)
    if convention == "bare":
        return value
    if convention == "dressed":
        return bare_idle_for_dressed(device, value)
    raise ValueError(f"unknown idle convention {convention!r}")


# ---------------------------------------------------------------------------
# propagation


def _check_band(device: DeviceParams, pulse: Waveform):
    if pulse.unit != UNIT_FREQUENCY:
        raise ValueError("pulse must be a coupler-frequency waveform")
    lo, hi = device.coupler.f_min, device.coupler.f_max
    tol = 1e-9 * hi
    bad = np.flatnonzero((pulse.samples < lo - tol) | (pulse.samples > hi + tol))
    if bad.size:
        i = int(bad[0])
        raise OutOfRange(f"pulse sample {i} at {pulse.samples[i]:.6f} MHz leaves the SQUID band", index=i)


def _gauss_frequencies(pulse: Waveform, n_steps: int) -> tuple[np.ndarray, float]:
    h = pulse.duration / n_steps
    starts = h * np.arange(n_steps)
    nodes = np.column_stack([starts + c * h for c in _GAUSS])
    return pulse.value_at(nodes), h


def propagate_fixed(device: DeviceParams, pulse: Waveform, n_steps: int) -> np.ndarray:
    """Propagator (bare basis) with ``n_steps`` fourth-order Magnus steps."""
    if pulse.duration == 0:
        return np.eye(device.dimension, dtype=complex)
    f_gauss, h = _gauss_frequencies(pulse, n_steps)
    static, number_c, coupling_c = device.hamiltonian_parts()
    return _kernels.magnus4_propagate(static, number_c, coupling_c, f_gauss, h, ANGULAR_PER_MHZ)


@dataclass
class PulseUnitary:
    U: np.ndarray
    dt: float
    n_steps: int
    population_shift: float


def pulse_unitary(
    device: DeviceParams,
    pulse: Waveform,
    dt_solver: float = DEFAULT_DT,
    check: bool = True,
    tol: float = POPULATION_TOL,
    min_dt: float = MIN_DT,
) -> PulseUnitary:
    """Pulse propagator with an automatic step-halving accuracy check.

    The step is halved until every transition probability ``|U_ij|^2``
    moves by less than ``tol``; :class:`ConvergenceFailure` is raised if
    that needs a step below ``min_dt``.
    """
    _check_band(device, pulse)
    T = pulse.duration
    if T == 0:
        return PulseUnitary(np.eye(device.dimension, dtype=complex), 0.0, 0, 0.0)
    n = max(1, int(math.ceil(T / dt_solver - 1e-9)))
    U = propagate_fixed(device, pulse, n)
    if not check:
        return PulseUnitary(U, T / n, n, float("nan"))
    while True:
        U2 = propagate_fixed(device, pulse, 2 * n)
        shift = float(np.max(np.abs(np.abs(U2) ** 2 - np.abs(U) ** 2)))
        if shift < tol:
            return PulseUnitary(U2, T / (2 * n), 2 * n, shift)
        n *= 2
        if T / (2 * n) < min_dt:
            raise ConvergenceFailure(
                f"step halving did not converge: population shift {shift:.3g} at dt={T / n:.3g} ns"
            )
        U = U2


def computational_phases(U: np.ndarray, basis: IdleBasis, duration: float, labels=COMPUTATIONAL):
    """Excess phase and residual leakage of each dressed state in ``labels``."""
    phases, leakage = {}, {}
    for lab in labels:
        v = basis.state(lab)
        amp = v.conj() @ (U @ v)
        E = basis.energies[basis.column(lab)]
        phases[HilbertLabel(*lab)] = float(-np.angle(amp) - ANGULAR_PER_MHZ * E * duration)
        leakage[HilbertLabel(*lab)] = float(max(0.0, 1.0 - abs(amp) ** 2))
    return phases, leakage


@dataclass
class EvolutionResult:
    """Outcome of :func:`evolve`.

    ``phases`` holds the excess phase (rad, idle frame) of each dressed
    computational state, wrapped to ``(-pi, pi]``.
    """

    final_state: np.ndarray
    unitary_check: float
    phases: dict
    populations: np.ndarray
    duration: float
    dt: float
    population_shift: float

    def to_dict(self) -> dict:
        return {
            "final_state_real": self.final_state.real,
            "final_state_imag": self.final_state.imag,
            "unitary_check": self.unitary_check,
            "phases": {str(k): v for k, v in self.phases.items()},
            "duration_ns": self.duration,
            "dt_ns": self.dt,
            "population_shift": self.population_shift,
        }


def _wrap(phi):
    return float(np.angle(np.exp(1j * phi)))


def evolve(
    device: DeviceParams,
    pulse: Waveform,
    initial,
    dt_solver: float = DEFAULT_DT,
    check: bool = True,
    tol: float = POPULATION_TOL,
    basis: IdleBasis | None = None,
) -> EvolutionResult:
    """Solve the Schrodinger equation for ``initial`` (bare basis) under ``pulse``."""
    psi0 = np.asarray(initial, dtype=complex)
    if psi0.shape != (device.dimension,):
        raise ValueError(f"initial state must have shape ({device.dimension},)")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-9:
        raise ValueError("initial state must be normalised")
    pu = pulse_unitary(device, pulse, dt_solver, check, tol)
    psi = pu.U @ psi0
    basis = basis or idle_basis(device, float(pulse.samples[0]))
    phases, _ = computational_phases(pu.U, basis, pulse.duration)
    return EvolutionResult(
        final_state=psi,
        unitary_check=float(abs(np.linalg.norm(psi) - 1.0)),
        phases={k: _wrap(v) for k, v in phases.items()},
        populations=np.abs(psi) ** 2,
        duration=pulse.duration,
        dt=pu.dt,
        population_shift=pu.population_shift,
    )


# ---------------------------------------------------------------------------
# conditional phase


def zeta_along(device: DeviceParams, pulse: Waveform, anchor: float, points: int = 201):
    """Adiabatic ``zeta`` (MHz) at each pulse sample, from a tracked spectrum."""
    lo, hi = float(pulse.samples.min()), float(pulse.samples.max())
    if hi - lo < 1e-9:
        grid = np.array([lo])
    else:
        grid = np.linspace(lo, hi, points)
    spec = track_spectrum(device, np.union1d(grid, [anchor]), anchor)
    return np.interp(pulse.samples, spec.grid, spec.zeta_curve())


def adiabatic_phase(device: DeviceParams, pulse: Waveform, anchor: float | None = None) -> float:
    """``2 pi int zeta dt`` over the pulse (rad), pads included."""
    anchor = float(pulse.samples[0]) if anchor is None else anchor
    z = zeta_along(device, pulse, anchor)
    active = np.trapezoid(z, dx=pulse.dt) if z.size > 1 else 0.0
    held = z[0] * pulse.pad_before + z[-1] * pulse.pad_after
    return float(ANGULAR_PER_MHZ * (active + held))


@dataclass
class PhaseResult:
    phase: float
    wrapped: float
    phases: dict
    leakage: dict
    adiabatic_estimate: float
    dt: float

    @property
    def max_leakage(self) -> float:
        return max(self.leakage.values())


def conditional_phase(
    device: DeviceParams,
    pulse: Waveform,
    dt_solver: float = DEFAULT_DT,
    check: bool = True,
    basis: IdleBasis | None = None,
) -> PhaseResult:
    """Conditional phase ``phi_11 - phi_10 - phi_01 + phi_00`` (rad).

    The raw value is only defined modulo 2 pi; ``phase`` picks the branch
    nearest to the adiabatic estimate ``2 pi int zeta dt``.
    """
    f0 = float(pulse.samples[0])
    if abs(pulse.samples[-1] - f0) > 1e-6:
        raise ValueError("pulse must return to its starting frequency")
    basis = basis or idle_basis(device, f0)
    pu = pulse_unitary(device, pulse, dt_solver, check)
    phases, leakage = computational_phases(pu.U, basis, pulse.duration)
    p = {k: phases[HilbertLabel(*k)] for k in ((1, 1, 0), (1, 0, 0), (0, 1, 0), (0, 0, 0))}
    raw = p[(1, 1, 0)] - p[(1, 0, 0)] - p[(0, 1, 0)] + p[(0, 0, 0)]
    wrapped = _wrap(raw)
    estimate = adiabatic_phase(device, pulse, f0)
    phase = wrapped + 2.0 * math.pi * round((estimate - wrapped) / (2.0 * math.pi))
    worst = max(leakage.values())
    if worst > LEAKAGE_WARNING:
        warnings.warn(f"residual leakage {worst:.3g} out of the computational states", HighLeakage, stacklevel=2)
    return PhaseResult(phase, wrapped, phases, leakage, estimate, pu.dt)


@dataclass
class Calibration:
    """Calibrated pulse: ``scale`` is the excursion in MHz for normalized
    envelopes, or lambda for adiabatically weighted pulses."""

    scale: float
    phase: float
    pulse: Waveform
    max_frequency: float
    monotone: bool
    scan: list = field(default_factory=list)


def calibrate_amplitude(
    device: DeviceParams,
    envelope,
    target_phase: float = math.pi,
    idle: float | None = None,
    dt: float | None = None,
    dt_solver: float = DEFAULT_DT,
    domain: str = "frequency",
    pad: float = 0.0,
    n_scan: int = 9,
    tol: float = 1e-4,
) -> Calibration:
    """Root-find the pulse amplitude giving ``target_phase``.

    The amplitude range (up to the SQUID maximum, or the largest lambda the
    D grid supports) is scanned on ``n_scan`` points; the first bracket that
    crosses the target is refined with Brent's method.
    """
    if isinstance(envelope, AwpSpec):
        idle = envelope.start_freq
        if dt is None:
            raise ValueError("AWP calibration needs the sample period dt")
        upper = awp_lambda_max(envelope, envelope.t_cz, envelope.start_freq) * (1.0 - 1e-9)

        def build(lam):
            if lam <= 0:
                n = int(round(envelope.t_cz / dt))
                return Waveform(np.full(n + 1, idle), dt).padded(pad, pad)
            return awp_generate(AwpSpec(envelope.t_cz, lam, envelope.d_curve, idle), dt).padded(pad, pad)

        peak = lambda w: float(w.samples.max())  # noqa: E731
    else:
        if not isinstance(envelope, Waveform) or envelope.unit != UNIT_AMPLITUDE:
            raise TypeError("envelope must be a normalized Waveform or an AwpSpec")
        idle = device.operating_point() if idle is None else idle
        upper = device.coupler.f_max - idle

        def build(excursion):
            return scale_envelope(envelope, idle, excursion, domain=domain, coupler=device.coupler).padded(pad, pad)

        peak = lambda w: float(w.samples.max())  # noqa: E731

    basis = idle_basis(device, idle)
    if target_phase == 0:
        w = build(0.0)
        return Calibration(0.0, 0.0, w, peak(w), True)

    cache = {}

    def phase_of(s):
        if s not in cache:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", HighLeakage)
                cache[s] = conditional_phase(device, build(s), dt_solver, basis=basis).phase
        return cache[s]

    grid = np.linspace(0.0, upper, n_scan)
    values = [0.0] + [phase_of(s) for s in grid[1:]]
    scan = list(zip(grid.tolist(), values))
    sign = np.sign(target_phase)
    diffs = sign * (np.array(values) - target_phase)
    crossing = np.flatnonzero((diffs[:-1] < 0) & (diffs[1:] >= 0))
    if crossing.size == 0:
        raise Unreachable(
            f"largest admissible amplitude gives phase {values[-1]:.4f} rad, short of {target_phase:.4f} rad"
        )
    i = int(crossing[0])
    monotone = bool(np.all(np.diff(sign * np.array(values[: i + 2])) > 0))
    s_star = brentq(lambda s: phase_of(s) - target_phase, grid[i], grid[i + 1], xtol=1e-7, rtol=1e-12)
    residual = abs(phase_of(s_star) - target_phase)
    if residual > tol:
        raise ConvergenceFailure(f"calibration residual {residual:.3g} rad exceeds {tol:g}")
    w = build(s_star)
    return Calibration(float(s_star), phase_of(s_star), w, peak(w), monotone, scan)


# ---------------------------------------------------------------------------
# leakage amplification


@dataclass
class LeakageMap:
    """Populations after ``N`` repetitions of pulse + idle delay.

    ``populations[d, N, j]`` is the population of dressed state
    ``labels[j]`` after ``cycles[N]`` repetitions at ``delays[d]``.
    ``cycle_averaged[d, j]`` averages over ``N >= 1``.
    """

    delays: np.ndarray
    cycles: np.ndarray
    populations: np.ndarray
    cycle_averaged: np.ndarray
    labels: list
    pulse_duration: float

    def column(self, label) -> int:
        if isinstance(label, str):
            label = HilbertLabel.parse(label)
        return self.labels.index(HilbertLabel(*label))

    def averaged(self, label) -> np.ndarray:
        return self.cycle_averaged[:, self.column(label)]

    def trace(self, label, delay_index: int) -> np.ndarray:
        return self.populations[delay_index, :, self.column(label)]

    def export(self, directory, labels=None, meta: dict | None = None) -> list:
        from .export import write_csv

        directory = Path(directory)
        written = []
        header = ["delay_ns"] + [f"N{n}" for n in self.cycles]
        for lab in labels or self.labels:
            j = self.column(lab)
            name = "P_" + "".join(map(str, lab[:2])) + "_" + str(lab[2]) + ".csv"
            rows = [[d, *self.populations[k, :, j]] for k, d in enumerate(self.delays)]
            written.append(write_csv(directory / name, header, rows, meta))
        avg_header = ["delay_ns"] + [str(lab) for lab in self.labels]
        rows = [[d, *self.cycle_averaged[k]] for k, d in enumerate(self.delays)]
        written.append(write_csv(directory / "cycle_averaged.csv", avg_header, rows, meta))
        return written


def cycle_matrix(pulse_dressed: np.ndarray, energies: np.ndarray, delay: float) -> np.ndarray:
    """One cycle (pulse then idle delay) in the idle dressed basis."""
    return np.exp(-1j * ANGULAR_PER_MHZ * energies * delay)[:, None] * pulse_dressed


def leakage_amplification(
    device: DeviceParams,
    pulse: Waveform,
    delays,
    max_cycles: int,
    dt_solver: float = DEFAULT_DT,
    initial=(1, 1, 0),
    basis: IdleBasis | None = None,
) -> LeakageMap:
    """Repeat ``pulse`` followed by a free delay up to ``max_cycles`` times."""
    f0 = float(pulse.samples[0])
    if abs(pulse.samples[-1] - f0) > 1e-6:
        raise ValueError("pulse must return to its starting frequency")
    if max_cycles < 0:
        raise ValueError("max_cycles must be non-negative")
    delays = np.asarray(delays, dtype=float)
    basis = basis or idle_basis(device, f0)
    U = pulse_unitary(device, pulse, dt_solver).U
    Ud = basis.vectors.conj().T @ U @ basis.vectors
    psi0 = np.zeros(device.dimension, dtype=complex)
    psi0[basis.column(initial)] = 1.0
    pops = np.empty((delays.size, max_cycles + 1, device.dimension))
    for k, d in enumerate(delays):
        pops[k] = _kernels.cycle_populations(cycle_matrix(Ud, basis.energies, d), psi0, max_cycles)
    avg = pops[:, 1:, :].mean(axis=1) if max_cycles >= 1 else pops[:, :1, :].mean(axis=1)
    return LeakageMap(delays, np.arange(max_cycles + 1), pops, avg, list(basis.labels), pulse.duration)


def find_trace_peaks(x, y, prominence: float = 0.05, min_separation: int = 2):
    """Peak positions with parabolic sub-grid refinement.

    ``prominence`` is relative to the trace range; ``min_separation`` is in
    grid steps.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    span = float(np.ptp(y)) if y.size else 0.0
    if span == 0.0:
        return np.array([])
    idx, _ = find_peaks(y, prominence=prominence * span, distance=min_separation)
    pos = []
    for i in idx:
        if 0 < i < y.size - 1:
            a, b, c = y[i - 1], y[i], y[i + 1]
            denom = a - 2.0 * b + c
            shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
            pos.append(x[i] + np.clip(shift, -0.5, 0.5) * (x[i + 1] - x[i - 1]) / 2.0)
        else:
            pos.append(x[i])
    return np.asarray(pos)


def peak_spacing(lmap: LeakageMap, label, window=None, prominence: float = 0.05, min_separation: int = 2) -> float:
    """Median delay spacing (ns) between peaks of a cycle-averaged trace."""
    x, y = lmap.delays, lmap.averaged(label)
    if window is not None:
        sel = (x >= window[0]) & (x <= window[1])
        x, y = x[sel], y[sel]
    return spacing_of(x, y, prominence, min_separation)


def spacing_of(x, y, prominence: float = 0.05, min_separation: int = 2) -> float:
    pos = find_trace_peaks(x, y, prominence, min_separation)
    if pos.size < 3:
        raise InsufficientPeaks(f"found {pos.size} peaks, need at least 3")
    return float(np.median(np.diff(pos)))


def feature_windows(lmap: LeakageMap, label, level: float = 0.5, skip_origin: bool = True):
    """Delay intervals where the cycle-averaged trace of ``label`` exceeds
    ``level`` times its maximum.  The interval touching zero delay is
    dropped when ``skip_origin`` is set."""
    x, y = lmap.delays, lmap.averaged(label)
    above = y >= level * y.max()
    edges = np.flatnonzero(np.diff(above.astype(int)))
    starts = list(np.flatnonzero(above[:1])) + list(edges[~above[edges]] + 1)
    stops = list(edges[above[edges]]) + ([x.size - 1] if above[-1] else [])
    windows = [(float(x[a]), float(x[b])) for a, b in zip(sorted(starts), sorted(stops))]
    if skip_origin:
        windows = [w for w in windows if w[0] > x[0]]
    return windows


def split_comb(positions, period: float, rel_tol: float = 0.05):
    """Split peak positions into the largest subset lying on a comb of
    spacing ``period`` (within ``rel_tol * period``) and the remainder."""
    p = np.sort(np.asarray(positions, dtype=float))
    if p.size == 0:
        return p, p
    tol = rel_tol * period
    best_key, best_mask = None, None
    for a in p:
        k = np.round((p - a) / period)
        err = np.abs(p - a - k * period)
        mask = err < tol
        key = (int(mask.sum()), -float(err[mask].sum()))
        if best_key is None or key > best_key:
            best_key, best_mask = key, mask
    return p[best_mask], p[~best_mask]


def second_order_spacing(x, y, first_order_period: float, windows, rel_tol: float = 0.05,
                         prominence: float = 0.05, min_separation: int = 2) -> float:
    """Median spacing of peaks that do not belong to the first-order comb.

    Peaks of ``y`` are detected separately inside each window; within each
    window the best-matching comb of spacing ``first_order_period`` is
    removed and the spacings between the remaining peaks are pooled.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    gaps = []
    n_rest = 0
    for lo, hi in windows:
        sel = (x >= lo) & (x <= hi)
        pos = find_trace_peaks(x[sel], y[sel], prominence, min_separation)
        _, rest = split_comb(pos, first_order_period, rel_tol)
        n_rest += rest.size
        gaps.extend(np.diff(rest).tolist())
    if n_rest < 3 or not gaps:
        raise InsufficientPeaks(f"only {n_rest} peaks off the first-order comb")
    return float(np.median(gaps))


# ---------------------------------------------------------------------------
# oscillation in the cycle number


@dataclass
class LeakageOscillationModel:
    """``P(N) = A + B cos(2 N mu)`` with ``mu`` in ``[0, pi/2]``."""

    A: float
    B: float
    mu: float
    rms: float

    @property
    def theta_if_cancelled(self) -> float:
        """Swap angle when the delay sits on a phase-cancellation peak."""
        return 2.0 * self.mu

    def predict(self, N):
        return self.A + self.B * np.cos(2.0 * np.asarray(N) * self.mu)

    def phi_given_theta(self, theta: float) -> float:
        c = math.cos(self.mu) / math.cos(theta / 2.0)
        return 2.0 * math.acos(max(-1.0, min(1.0, c)))


def mu_from_angles(theta: float, phi: float) -> float:
    """``cos mu = cos(phi/2) cos(theta/2)``."""
    return math.acos(max(-1.0, min(1.0, math.cos(phi / 2.0) * math.cos(theta / 2.0))))


def _linear_fit(N, y, mu):
    X = np.column_stack([np.ones_like(N), np.cos(2.0 * N * mu)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    return coef, float(r @ r)


def fit_oscillation(trace, cycles=None, grid_points: int = 4001, noise_floor: float = 1e-6) -> LeakageOscillationModel:
    """Least-squares fit of ``A + B cos(2 N mu)``.

    ``mu`` is located on a dense grid (with A and B solved linearly at each
    candidate) and then polished with a bounded scalar minimisation.  The
    search starts at ``pi / (8 N_max)``: slower oscillations cannot be told
    apart from a constant over the sampled cycles.
    """
    y = np.asarray(trace, dtype=float)
    N = np.arange(y.size, dtype=float) if cycles is None else np.asarray(cycles, dtype=float)
    if y.size < 8:
        raise ValueError("need at least 8 cycle points")
    if np.ptp(y) <= noise_floor:
        raise FitDegenerate("trace is flat: oscillation amplitude below the noise floor")
    mu_min = math.pi / (8.0 * max(N.max(), 1.0))
    mus = np.linspace(mu_min, 0.5 * math.pi, grid_points)
    sse = np.array([_linear_fit(N, y, m)[1] for m in mus])
    k = int(np.argmin(sse))
    step = mus[1] - mus[0]
    lo, hi = max(mu_min, mus[k] - step), min(0.5 * math.pi, mus[k] + step)
    res = minimize_scalar(lambda m: _linear_fit(N, y, m)[1], bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12})
    mu = float(res.x) if res.fun <= sse[k] else float(mus[k])
    (A, B), s = _linear_fit(N, y, mu)
    rms = math.sqrt(s / y.size)
    if abs(B) <= max(noise_floor, 3.0 * rms):
        raise FitDegenerate(f"oscillation amplitude {abs(B):.3g} is below the noise floor")
    return LeakageOscillationModel(float(A), float(B), mu, rms)


def cancellation_fits(lmap: LeakageMap, label=(1, 1, 0), prominence: float = 0.05, max_rel_rms: float = 0.1):
    """Fit the N-oscillation at every phase-cancellation delay.

    Cancellation delays are the local minima of the cycle-averaged
    population of ``label``.  Returns ``[(delay, model), ...]``; delays
    whose trace is not described by a single cosine (fit rms above
    ``max_rel_rms * |B|``) are skipped.
    """
    y = lmap.averaged(label)
    idx, _ = find_peaks(-y, prominence=prominence * max(float(np.ptp(y)), 1e-300), distance=2)
    out = []
    for i in idx:
        try:
            model = fit_oscillation(lmap.populations[i, :, lmap.column(label)], lmap.cycles)
        except FitDegenerate:
            continue
        if model.rms <= max_rel_rms * abs(model.B):
            out.append((float(lmap.delays[i]), model))
    return out


def fastest_oscillation(lmap: LeakageMap, label=(1, 1, 0)) -> tuple[float, LeakageOscillationModel]:
    """Cancellation delay with the largest fitted ``mu`` (largest leakage angle)."""
    fits = cancellation_fits(lmap, label)
    if not fits:
        raise FitDegenerate("no phase-cancellation delay gave a usable oscillation fit")
    return max(fits, key=lambda item: item[1].mu)


def incoherent_error(t_total: float, t1_q1: float, t2e_q1: float, t1_q2: float, t2e_q2: float) -> float:
    """Coherence-limited error of a gate of length ``t_total`` (ns).

    Coherence times are in microseconds.
    """
    times = (t1_q1, t2e_q1, t1_q2, t2e_q2)
    if t_total < 0 or any(not t > 0 for t in times):
        raise ValueError("coherence times must be positive and t_total non-negative")
    r = 0.0
    for t1, t2 in ((t1_q1, t2e_q1), (t1_q2, t2e_q2)):
        r += t_total / (5.0 * t1 * 1e3) + 2.0 * t_total / (5.0 * t2 * 1e3)
    return r
