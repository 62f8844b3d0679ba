"""Randomized-benchmarking decay fits and gate-error intervals.

The survival probability at sequence depth ``m`` is ``P(m) = A p**m + B``
with ``0 < p < 1``, ``A > 0``, ``B > 0`` and ``A + B <= 1``.  The fit works
in an unconstrained space ``u = (xi, beta, gamma)`` with

    A = sigmoid(xi),  B = sigmoid(beta) * (1 - A),  p = sigmoid(gamma)

and maximises the binomial log-likelihood of the observed counts.

Counts from several random seeds at one depth can be pooled: the binomial
likelihood only depends on the summed successes and trials, so pooling
gives exactly the per-seed estimate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit as _logit, ndtri

from .errors import DegenerateData, InsufficientPhysicalSamples, NonConvergence, NonPhysical
from .export import read_csv

HESSIAN_STEP = 1e-5
GRADIENT_TOL = 1e-8


def sigmoid(x):
    return expit(x)


def logit(p):
    return _logit(p)


def z_value(level: float) -> float:
    """Two-sided standard-normal quantile for a confidence ``level``."""
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must lie in (0, 1)")
    return float(ndtri(0.5 + 0.5 * level))


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    clamped: bool = False

    def __iter__(self):
        return iter((self.lower, self.upper))

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    @property
    def physical(self) -> bool:
        return 0.0 <= self.lower and self.upper <= 1.0


def _check_counts(k, n):
    if n <= 0:
        raise ValueError("number of trials must be positive")
    if not 0 <= k <= n:
        raise ValueError("successes must lie between 0 and the number of trials")


def wald_interval(k: int, n: int, level: float = 0.95, clamp: bool = False) -> Interval:
    """Normal-approximation interval ``p_hat +- z sqrt(p_hat (1 - p_hat) / n)``.

    The bounds may fall outside [0, 1].  With ``clamp=True`` they are
    clipped and ``clamped`` records whether clipping changed anything.
    """
    _check_counts(k, n)
    z = z_value(level)
    p = k / n
    half = z * np.sqrt(p * (1.0 - p) / n)
    lo, hi = p - half, p + half
    if not clamp:
        return Interval(float(lo), float(hi))
    return Interval(float(max(0.0, lo)), float(min(1.0, hi)), bool(lo < 0.0 or hi > 1.0))


def wilson_interval(k: int, n: int, level: float = 0.95) -> Interval:
    """Wilson score interval."""
    _check_counts(k, n)
    z = z_value(level)
    z2 = z * z
    p = k / n
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z / denom * np.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n))
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return Interval(float(lo), float(hi))


@dataclass
class RBDataset:
    """Pooled survival counts per depth."""

    depths: np.ndarray
    successes: np.ndarray
    trials: np.ndarray

    def __post_init__(self):
        self.depths = np.asarray(self.depths, dtype=int)
        self.successes = np.asarray(self.successes, dtype=int)
        self.trials = np.asarray(self.trials, dtype=int)
        if not (self.depths.shape == self.successes.shape == self.trials.shape) or self.depths.ndim != 1:
            raise ValueError("depths, successes and trials must be 1-D arrays of equal length")
        if self.depths.size == 0:
            raise ValueError("RB dataset is empty")
        if np.any(self.depths < 0) or np.any(np.diff(self.depths) <= 0):
            raise ValueError("depths must be non-negative and strictly increasing")
        if np.any(self.trials <= 0) or np.any(self.successes < 0) or np.any(self.successes > self.trials):
            raise ValueError("require 0 <= successes <= trials and trials > 0")

    @property
    def survival(self) -> np.ndarray:
        return self.successes / self.trials

    @classmethod
    def pooled(cls, depths, successes, trials) -> "RBDataset":
        """Sum ``(n_seeds, n_depths)`` count arrays over seeds."""
        s = np.atleast_2d(successes).sum(axis=0)
        t = np.atleast_2d(trials).sum(axis=0)
        return cls(depths, s, t)

    @classmethod
    def from_csv(cls, path) -> "RBDataset":
        """Read ``depth,successes,trials``; repeated depths (seeds) are pooled."""
        _, header, rows = read_csv(path)
        if [h.lower() for h in header[:3]] != ["depth", "successes", "trials"]:
            raise ValueError("RB CSV header must be depth,successes,trials")
        acc: dict[int, list[int]] = {}
        for row in rows:
            m, k, n = (int(float(v)) for v in row[:3])
            a = acc.setdefault(m, [0, 0])
            a[0] += k
            a[1] += n
        depths = sorted(acc)
        return cls(depths, [acc[m][0] for m in depths], [acc[m][1] for m in depths])

    def rows(self):
        return [[int(m), int(k), int(n)] for m, k, n in zip(self.depths, self.successes, self.trials)]


def decay_model(depths, A, B, p):
    return A * np.power(p, np.asarray(depths, dtype=float)) + B


def _unpack(u):
    A = expit(u[0])
    c = expit(u[1])
    p = expit(u[2])
    return A, c, p


def from_natural(A: float, B: float, p: float) -> np.ndarray:
    """Unconstrained coordinates of a valid ``(A, B, p)``."""
    if not (0 < A < 1 and 0 < B and A + B < 1 and 0 < p < 1):
        raise ValueError("need 0<A, 0<B, A+B<1 and 0<p<1")
    return np.array([_logit(A), _logit(B / (1.0 - A)), _logit(p)])


_EPS = 1e-300


def log_likelihood(u, data: RBDataset) -> float:
    A, c, p = _unpack(u)
    P = A * p ** data.depths + c * (1.0 - A)
    P = np.clip(P, _EPS, 1.0 - 1e-16)
    k, n = data.successes, data.trials
    return float(np.sum(k * np.log(P) + (n - k) * np.log1p(-P)))


def log_likelihood_grad(u, data: RBDataset) -> np.ndarray:
    A, c, p = _unpack(u)
    m = data.depths.astype(float)
    pm = p ** m
    P = np.clip(A * pm + c * (1.0 - A), _EPS, 1.0 - 1e-16)
    k, n = data.successes, data.trials
    w = k / P - (n - k) / (1.0 - P)
    pm1 = np.where(m > 0, m * p ** np.maximum(m - 1.0, 0.0), 0.0)
    dA = (pm - c) * A * (1.0 - A)
    dc = (1.0 - A) * c * (1.0 - c)
    dp = A * pm1 * p * (1.0 - p)
    return np.array([np.sum(w * dA), np.sum(w * dc), np.sum(w * dp)])


def hessian_fd(u, data: RBDataset, step: float = HESSIAN_STEP) -> np.ndarray:
    """Central finite differences of the analytic gradient."""
    H = np.empty((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = step
        H[:, j] = (log_likelihood_grad(u + e, data) - log_likelihood_grad(u - e, data)) / (2 * step)
    return 0.5 * (H + H.T)


def initial_guess(data) -> np.ndarray:
    """Log-linear heuristic on the offset survival curve."""
    y = data.survival
    span = max(float(y.max() - y.min()), 1e-6)
    B0 = float(np.clip(y.min() - 0.05 * span, 1e-3, 0.98))
    z = np.log(np.clip(y - B0, 1e-9, None))
    m = data.depths.astype(float)
    if m.size >= 2 and np.ptp(m) > 0:
        slope, icpt = np.polyfit(m, z, 1)
    else:
        slope, icpt = -0.01, np.log(max(y[0] - B0, 1e-3))
    p0 = float(np.clip(np.exp(slope), 1e-4, 1 - 1e-6))
    A0 = float(np.clip(np.exp(icpt), 1e-3, 0.999 - B0))
    return from_natural(A0, B0, p0)


@dataclass
class RBFit:
    A: float
    B: float
    p: float
    u: np.ndarray
    covariance: np.ndarray  # in (xi, beta, gamma)
    loglik: float
    gradient_norm: float
    iterations: int
    notes: list = field(default_factory=list)

    @property
    def sigma_gamma(self) -> float:
        return float(np.sqrt(max(self.covariance[2, 2], 0.0)))

    @property
    def sigma_p(self) -> float:
        """Delta-method standard error of ``p``."""
        return self.p * (1.0 - self.p) * self.sigma_gamma

    def p_interval(self, level: float = 0.95) -> Interval:
        """Interval on ``p`` from a symmetric interval on ``gamma``."""
        z = z_value(level)
        g = self.u[2]
        return Interval(float(expit(g - z * self.sigma_gamma)), float(expit(g + z * self.sigma_gamma)))

    def to_dict(self) -> dict:
        return {
            "A": self.A, "B": self.B, "p": self.p, "sigma_p": self.sigma_p,
            "loglik": self.loglik, "gradient_norm": self.gradient_norm,
            "iterations": self.iterations, "covariance_u": self.covariance, "notes": self.notes,
        }


def _stack(datasets) -> SimpleNamespace:
    """Concatenate per-seed datasets into one count table (depths may repeat)."""
    depths = np.concatenate([d.depths for d in datasets])
    k = np.concatenate([d.successes for d in datasets])
    n = np.concatenate([d.trials for d in datasets])
    return SimpleNamespace(depths=depths, successes=k, trials=n, survival=k / n)


def mle_fit(data, init=None, max_newton: int = 50) -> RBFit:
    """Maximum-likelihood fit of the RB decay.

    ``data`` is a pooled :class:`RBDataset` or a sequence of per-seed
    datasets whose likelihoods are multiplied.  BFGS with the analytic
    gradient is followed by Newton steps on a finite-difference Hessian
    until the gradient norm per trial falls below ``1e-8``.  The covariance
    is the inverse observed information in ``u`` space.  ``init`` is an
    optional ``(p, A, B)`` starting point.
    """
    if not isinstance(data, RBDataset):
        data = _stack(list(data))
    if len(np.unique(data.depths)) < 3:
        raise DegenerateData("at least three distinct depths are needed")
    y = data.survival
    if np.all(y == y[0]):
        raise DegenerateData("all survival probabilities are identical; the decay is not identifiable")
    u0 = initial_guess(data) if init is None else from_natural(init[1], init[2], init[0])
    total = float(data.trials.sum())
    f = lambda u: -log_likelihood(u, data) / total  # noqa: E731
    g = lambda u: -log_likelihood_grad(u, data) / total  # noqa: E731
    res = minimize(f, u0, jac=g, method="BFGS", options={"gtol": 1e-10, "maxiter": 2000})
    u = res.x
    iterations = int(res.nit)
    notes = []
    for _ in range(max_newton):
        grad = log_likelihood_grad(u, data) / total
        if np.linalg.norm(grad) < GRADIENT_TOL:
            break
        H = hessian_fd(u, data) / total
        try:
            step = np.linalg.solve(H, -grad)
        except np.linalg.LinAlgError:
            break
        # backtrack so the likelihood never decreases
        t, base = 1.0, log_likelihood(u, data)
        while t > 1e-6 and log_likelihood(u + t * step, data) < base:
            t *= 0.5
        if t <= 1e-6:
            break
        u = u + t * step
        iterations += 1
    gnorm = float(np.linalg.norm(log_likelihood_grad(u, data)) / total)
    if not np.all(np.isfinite(u)) or gnorm > 1e3 * GRADIENT_TOL:
        raise NonConvergence(f"RB fit did not converge (gradient norm {gnorm:.3g} per trial)", best=u)
    if gnorm > GRADIENT_TOL:
        notes.append(f"gradient norm per trial {gnorm:.3g} above {GRADIENT_TOL}")
    info = -hessian_fd(u, data)
    try:
        cov = np.linalg.inv(info)
        if np.any(np.linalg.eigvalsh(0.5 * (cov + cov.T)) < 0):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(info)
        notes.append("observed information not positive definite; pseudo-inverse used")
    A, c, p = _unpack(u)
    return RBFit(float(A), float(c * (1 - A)), float(p), u, 0.5 * (cov + cov.T),
                 log_likelihood(u, data), gnorm, iterations, notes)


def gate_error(p_rb: float, p_irb: float, d: int = 4, warn: bool = True) -> float:
    """Interleaved gate error ``r = (d-1)/d * (1 - p_irb / p_rb)``."""
    r = (d - 1) / d * (1.0 - p_irb / p_rb)
    if warn and not 0.0 <= r <= 1.0:
        warnings.warn(f"gate error {r:.4g} lies outside [0, 1]", NonPhysical, stacklevel=2)
    return float(r)


def delta_method_sigma(fit_rb: RBFit, fit_irb: RBFit, d: int = 4) -> float:
    pr, pi = fit_rb.p, fit_irb.p
    a = fit_irb.sigma_p / pr
    b = pi * fit_rb.sigma_p / pr**2
    return float((d - 1) / d * np.hypot(a, b))


@dataclass
class GateErrorEstimate:
    """Monte Carlo summary of the interleaved gate error.

    ``r`` is the mean of the physical draws; ``point`` is the gate error of
    the two fitted ``p`` values.
    """

    r: float
    lower: float
    upper: float
    median: float
    std: float
    point: float
    sigma_delta: float
    samples_used: int
    samples_drawn: int
    level: float
    seed: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def monte_carlo_ci(fit_rb: RBFit, fit_irb: RBFit, d: int = 4, samples: int = 10000,
                   level: float = 0.95, seed: int = 0) -> GateErrorEstimate:
    """Percentile interval of ``r`` from Gaussian draws of both fits in ``u`` space.

    Draws with ``r`` outside [0, 1] are discarded; if more than half are
    discarded :class:`InsufficientPhysicalSamples` is raised.
    """
    rng = np.random.default_rng(seed)
    ur = rng.multivariate_normal(fit_rb.u, fit_rb.covariance, size=samples, method="eigh")
    ui = rng.multivariate_normal(fit_irb.u, fit_irb.covariance, size=samples, method="eigh")
    r = (d - 1) / d * (1.0 - expit(ui[:, 2]) / expit(ur[:, 2]))
    ok = (r >= 0.0) & (r <= 1.0)
    if ok.sum() * 2 < samples:
        raise InsufficientPhysicalSamples(
            f"only {int(ok.sum())} of {samples} draws give a physical gate error")
    kept = r[ok]
    alpha = 1.0 - level
    lo, med, hi = np.quantile(kept, [alpha / 2, 0.5, 1 - alpha / 2])
    mean = float(np.clip(kept.mean(), lo, hi))  # guards round-off when the draws coincide
    return GateErrorEstimate(
        mean, float(lo), float(hi), float(med), float(kept.std()),
        gate_error(fit_rb.p, fit_irb.p, d, warn=False),
        delta_method_sigma(fit_rb, fit_irb, d), int(ok.sum()), int(samples), level, int(seed))


def synthesize_rb_counts(p: float, A: float, B: float, depths, shots: int, seed: int = 0) -> RBDataset:
    rng = np.random.default_rng(seed)
    depths = np.asarray(depths, dtype=int)
    prob = decay_model(depths, A, B, p)
    k = rng.binomial(shots, prob)
    return RBDataset(depths, k, np.full(depths.size, shots))
