"""Joint spectroscopy / ZZ fit and a seeded black-box parameter search.

Forward model: for every flux point the bare coupler frequency follows
from the SQUID relation; dressed one-excitation frequencies and ``zeta``
come from a tracked spectrum of the candidate device.  The objective is

    sum (f_model - f_data)**2 / sigma**2 + sum (100 (zeta_model - zeta_data))**2 / sigma**2

with missing observables (NaN) masked out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import qmc

from .device import DeviceParams, TunableCouplerParams, flux_to_frequency
from .errors import NonConvergence, SingularJacobian
from .export import read_csv
from .spectrum import track_spectrum, tracking_grid

ZETA_WEIGHT = 100.0
TRACK_STEP = 25.0  # MHz, largest step of the label-tracking path
OBSERVABLES = ("f1", "f2", "fc", "zeta")
FREE_PARAMETERS = ("rho_12", "rho_1c", "rho_2c", "f_max", "ec", "jj_ratio")

_LABELS = {"f1": (1, 0, 0), "f2": (0, 1, 0), "fc": (0, 0, 1)}


@dataclass
class SpectroscopyDataset:
    """Observables versus coupler flux; NaN marks a missing value."""

    flux: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    fc: np.ndarray
    zeta: np.ndarray
    sigma: dict = field(default_factory=dict)

    def __post_init__(self):
        self.flux = np.asarray(self.flux, dtype=float)
        n = self.flux.size
        if not np.all(np.isfinite(self.flux)):
            raise ValueError("flux values must be finite")
        for name in OBSERVABLES:
            arr = getattr(self, name)
            arr = np.full(n, np.nan) if arr is None else np.asarray(arr, dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have one entry per flux point")
            setattr(self, name, arr)
        present = np.column_stack([np.isfinite(getattr(self, k)) for k in OBSERVABLES])
        if n and not np.all(present.any(axis=1)):
            raise ValueError("every flux point needs at least one observable")
        self.sigma = {k: np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy() for k, v in self.sigma.items()}

    def __len__(self):
        return self.flux.size

    def subset(self, idx) -> "SpectroscopyDataset":
        idx = np.asarray(idx)
        return SpectroscopyDataset(
            self.flux[idx], self.f1[idx], self.f2[idx], self.fc[idx], self.zeta[idx],
            {k: v[idx] for k, v in self.sigma.items()},
        )

    @classmethod
    def from_csv(cls, path) -> "SpectroscopyDataset":
        """Columns ``flux,f1,f2,fc,zeta`` (blank = missing) and optional
        ``sigma_<name>`` uncertainty columns."""
        _, header, rows = read_csv(path)
        if not header or header[0] != "flux":
            raise ValueError("dataset CSV must start with a 'flux' column")
        cols = {h: [] for h in header}
        for row in rows:
            row = list(row) + [""] * (len(header) - len(row))
            for h, v in zip(header, row):
                cols[h].append(float(v) if v.strip() else np.nan)
        get = lambda k: np.array(cols[k]) if k in cols else None  # noqa: E731
        sigma = {k[6:]: np.array(v) for k, v in cols.items() if k.startswith("sigma_")}
        return cls(get("flux"), get("f1"), get("f2"), get("fc"), get("zeta"), sigma)

    def to_rows(self):
        return [[x, *(getattr(self, k)[i] for k in OBSERVABLES)] for i, x in enumerate(self.flux)]


def model_observables(device: DeviceParams, flux, anchor: float | None = None) -> dict:
    """Dressed ``f1, f2, fc`` and ``zeta`` (MHz) at each flux point."""
    flux = np.atleast_1d(np.asarray(flux, dtype=float))
    freqs = np.atleast_1d(flux_to_frequency(device.coupler, flux))
    if anchor is None:
        anchor = float(freqs.min())
    spec = track_spectrum(device, tracking_grid(freqs, anchor, TRACK_STEP), anchor)
    idx = np.searchsorted(spec.grid, freqs)
    e0 = spec.energy((0, 0, 0))[idx]
    out = {k: spec.energy(lab)[idx] - e0 for k, lab in _LABELS.items()}
    out["zeta"] = spec.zeta_curve()[idx]
    return out


def _get(device: DeviceParams, name: str) -> float:
    if name in ("rho_12", "rho_1c", "rho_2c"):
        return getattr(device, name)
    if name == "f_max":
        return device.coupler.f_max
    if name in ("ec", "jj_ratio"):
        return getattr(device.coupler, name)
    raise ValueError(f"unknown fit parameter {name!r}; expected one of {FREE_PARAMETERS}")


def with_parameters(device: DeviceParams, values: dict) -> DeviceParams:
    """Copy of ``device`` with the named parameters replaced."""
    changes = {k: float(v) for k, v in values.items() if k.startswith("rho_")}
    coupler_keys = {"f_max", "ec", "jj_ratio"} & set(values)
    if coupler_keys:
        c = device.coupler
        f_max = float(values.get("f_max", c.f_max))
        ec = float(values.get("ec", c.ec))
        ratio = float(values.get("jj_ratio", c.jj_ratio))
        changes["coupler"] = TunableCouplerParams.from_max_frequency(f_max, ec, ratio, c.levels)
    for k in values:
        _get(device, k)  # validates the name
    return device.replace(**changes)


def residual_vector(device: DeviceParams, data: SpectroscopyDataset, anchor=None, zeta_weight=ZETA_WEIGHT):
    model = model_observables(device, data.flux, anchor)
    parts = []
    for k in OBSERVABLES:
        obs = getattr(data, k)
        mask = np.isfinite(obs)
        r = model[k][mask] - obs[mask]
        if k in data.sigma:
            r = r / data.sigma[k][mask]
        if k == "zeta":
            r = zeta_weight * r
        parts.append(r)
    return np.concatenate(parts)


@dataclass
class FitResult:
    device: DeviceParams
    residuals: np.ndarray
    objective: float
    report: dict

    def to_dict(self) -> dict:
        return {
            "device": self.device.to_dict(),
            "objective": self.objective,
            "residuals": self.residuals.tolist(),
            "report": self.report,
        }


def joint_fit(
    data: SpectroscopyDataset,
    initial: DeviceParams,
    free=("rho_12", "rho_1c", "rho_2c", "f_max", "ec", "jj_ratio"),
    anchor: float | None = None,
    zeta_weight: float = ZETA_WEIGHT,
    gtol: float = 1e-8,
    xtol: float = 1e-10,
    max_nfev: int = 400,
) -> FitResult:
    """Least-squares fit of the free device parameters.

    Parameters are optimised as ratios to their initial values (or
    absolute values where the initial value is zero).  The run stops when
    the scaled gradient norm drops below ``gtol`` or the relative step
    below ``xtol``.
    """
    free = list(free)
    for name in free:
        _get(initial, name)
    scale = np.array([abs(_get(initial, k)) or 1.0 for k in free])
    x0 = np.array([_get(initial, k) for k in free]) / scale if free else np.zeros(0)
    history = []

    def build(x):
        return with_parameters(initial, dict(zip(free, x * scale)))

    def fun(x):
        r = residual_vector(build(x), data, anchor, zeta_weight)
        history.append(float(r @ r))
        return r

    if not free:
        r = residual_vector(initial, data, anchor, zeta_weight)
        return FitResult(initial, r, float(r @ r), {"nfev": 1, "iterations": 0, "status": "no free parameters"})

    n_res = fun(x0).size
    if n_res < len(free):
        raise SingularJacobian(f"{n_res} residuals cannot determine {len(free)} free parameters")
    res = least_squares(fun, x0, method="trf", jac="2-point", diff_step=1e-7,
                        x_scale=1.0, ftol=None, xtol=xtol, gtol=gtol, max_nfev=max_nfev)
    best = build(res.x)
    s = np.linalg.svd(res.jac, compute_uv=False)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else math.inf
    report = {
        "status": int(res.status),
        "message": str(res.message),
        "nfev": int(res.nfev),
        "gradient_norm": float(np.linalg.norm(res.grad, np.inf)),
        "jacobian_condition": cond,
        "initial_objective": history[0],
        "free": free,
    }
    if s[-1] <= 1e-12 * s[0]:
        raise SingularJacobian(f"Jacobian is rank deficient at the optimum (condition {cond:.3g})")
    if res.status <= 0:
        raise NonConvergence(f"joint fit stopped without converging: {res.message}", best=best)
    return FitResult(best, res.fun, float(2.0 * res.cost), report)


def bootstrap(data: SpectroscopyDataset, initial: DeviceParams, free, n: int = 100, seed: int = 0, **kw):
    """Refit ``n`` resampled datasets; returns an ``(n, len(free))`` array."""
    rng = np.random.default_rng(seed)
    out = np.empty((n, len(free)))
    for i in range(n):
        idx = rng.integers(0, len(data), len(data))
        fit = joint_fit(data.subset(idx), initial, free, **kw)
        out[i] = [_get(fit.device, k) for k in free]
    return out


def synthetic_dataset(device: DeviceParams, flux, noise: float = 0.0, seed: int = 0,
                      observables=OBSERVABLES, anchor=None) -> SpectroscopyDataset:
    """Forward-model data, optionally with Gaussian noise (MHz)."""
    flux = np.asarray(flux, dtype=float)
    model = model_observables(device, flux, anchor)
    rng = np.random.default_rng(seed)
    cols = {}
    for k in OBSERVABLES:
        if k in observables:
            cols[k] = model[k] + (rng.normal(0.0, noise, flux.size) if noise else 0.0)
        else:
            cols[k] = None
    return SpectroscopyDataset(flux, cols["f1"], cols["f2"], cols["fc"], cols["zeta"])


# ---------------------------------------------------------------------------
# black-box search


@dataclass
class SearchResult:
    x: np.ndarray
    value: float
    trace: list  # [(x, value), ...] in evaluation order

    @property
    def evaluations(self) -> int:
        return len(self.trace)


def parameter_search(objective, bounds, budget: int, seed: int, n_initial: int | None = None,
                     initial_step: float = 0.25, min_step: float = 1e-12) -> SearchResult:
    """Latin-hypercube sampling followed by coordinate descent.

    Half of the budget (at most ``20 * dim`` points) goes to the seeded
    Latin hypercube; coordinate descent then probes ``+-step`` along each
    axis from the incumbent, halving the step after a sweep without
    improvement.  Evaluation order is fixed, so the trace is reproducible.
    Exceptions from ``objective`` propagate with a ``point`` attribute.
    """
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2 or not np.all(np.isfinite(bounds)):
        raise ValueError("bounds must be a finite (dim, 2) array")
    if np.any(bounds[:, 1] < bounds[:, 0]):
        raise ValueError("each bound must satisfy lower <= upper")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    lo, hi = bounds[:, 0], bounds[:, 1]
    width = hi - lo
    dim = bounds.shape[0]
    trace = []

    def evaluate(u):
        x = lo + u * width
        try:
            value = float(objective(x.copy()))
        except Exception as exc:
            exc.point = x.copy()
            raise
        trace.append((x, value))
        return value

    n0 = n_initial if n_initial is not None else max(1, min(budget // 2 or 1, 20 * dim))
    n0 = min(n0, budget)
    sample = qmc.LatinHypercube(d=dim, seed=seed).random(n0)
    values = [evaluate(u) for u in sample]
    k = int(np.argmin(values))
    best_u, best_f = sample[k].copy(), values[k]

    step = initial_step
    while len(trace) < budget and step >= min_step:
        improved = False
        for j in range(dim):
            for sign in (1.0, -1.0):
                if len(trace) >= budget:
                    break
                cand = best_u.copy()
                cand[j] = min(1.0, max(0.0, cand[j] + sign * step))
                if cand[j] == best_u[j]:
                    continue
                f = evaluate(cand)
                if f < best_f:
                    best_u, best_f, improved = cand, f, True
                    break
        if not improved:
            step *= 0.5
    return SearchResult(lo + best_u * width, best_f, trace)
