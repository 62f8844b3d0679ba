"""Two fixed transmons coupled through a flux-tunable transmon.

Energies are linear frequencies in MHz throughout the public API (the
Hamiltonian is ``H/2pi``).  The dynamics module converts to angular units
(rad/ns) with :data:`ANGULAR_PER_MHZ` at the single point where time enters.
Flux is in units of the flux quantum.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, DimensionOverflow, OutOfRange

#: 1 MHz of linear frequency expressed as angular frequency in rad/ns.
ANGULAR_PER_MHZ = 2.0 * math.pi * 1e-3

MAX_DIMENSION = 10_000

PRESET_NAMES = ("measured_device", "sym_comparison", "asym_comparison")


@dataclass(frozen=True)
class TransmonParams:
    bare_frequency: float
    anharmonicity: float
    levels: int = 3

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 2:
            raise ValueError(f"levels must be an integer >= 2, got {self.levels}")
        if not self.anharmonicity < 0:
            raise ValueError("transmon anharmonicity must be negative")
        if not self.bare_frequency > 0:
            raise ValueError("bare_frequency must be positive")


@dataclass(frozen=True)
class TunableCouplerParams:
    """Asymmetric-SQUID transmon.

    ``ej_sum`` is E_J1 + E_J2 and ``jj_ratio`` is E_J1 / E_J2 (>= 1), both
    with energies in MHz.  The anharmonicity of the coupler is taken as
    ``-ec``.
    """

    ej_sum: float
    ec: float
    jj_ratio: float
    levels: int = 3

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 2:
            raise ValueError(f"levels must be an integer >= 2, got {self.levels}")
        if not self.ej_sum > 0:
            raise ValueError("ej_sum must be positive")
        if not self.ec > 0:
            raise ValueError("ec must be positive")
        if not self.jj_ratio >= 1:
            raise ValueError("jj_ratio must be >= 1")
        if not self.f_max > self.f_min:
            raise ValueError("SQUID band is empty: f_max <= f_min")

    @property
    def anharmonicity(self) -> float:
        return -self.ec

    @property
    def junction_energies(self) -> tuple[float, float]:
        ej2 = self.ej_sum / (1.0 + self.jj_ratio)
        return self.ej_sum - ej2, ej2

    @property
    def f_max(self) -> float:
        return flux_to_frequency(self, 0.0)

    @property
    def f_min(self) -> float:
        return flux_to_frequency(self, 0.5)

    @classmethod
    def from_max_frequency(cls, f_max: float, ec: float, jj_ratio: float, levels: int = 3):
        """Build from the zero-flux bare frequency instead of ``ej_sum``."""
        return cls(ej_sum=(f_max + ec) ** 2 / (8.0 * ec), ec=ec, jj_ratio=jj_ratio, levels=levels)


class HilbertLabel(NamedTuple):
    """Occupations of qubit 1, qubit 2 and the coupler."""

    n1: int
    n2: int
    nc: int

    def __str__(self):
        return f"{self.n1}{self.n2},{self.nc}"

    @classmethod
    def parse(cls, text: str) -> "HilbertLabel":
        """Parse ``"11,0"``, ``"|11,0>"`` or ``"1,1,0"`` into a label."""
        parts = [p.strip() for p in text.strip().strip("|>⟩ ").split(",")]
        try:
            if len(parts) == 3:
                return cls(*(int(p) for p in parts))
            if len(parts) == 2 and len(parts[0]) == 2:
                return cls(int(parts[0][0]), int(parts[0][1]), int(parts[1]))
        except ValueError:
            pass
        raise ValueError(f"cannot parse state label {text!r}")


COMPUTATIONAL = (
    HilbertLabel(0, 0, 0),
    HilbertLabel(0, 1, 0),
    HilbertLabel(1, 0, 0),
    HilbertLabel(1, 1, 0),
)


@dataclass(frozen=True)
class DeviceParams:
    q1: TransmonParams
    q2: TransmonParams
    coupler: TunableCouplerParams
    rho_12: float
    rho_1c: float
    rho_2c: float
    name: str = "custom"
    #: named coupler operating points (bare MHz), e.g. ``idle_frequency``
    operating_points: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        for key in ("rho_12", "rho_1c", "rho_2c"):
            if not math.isfinite(getattr(self, key)):
                raise ValueError(f"{key} must be finite")
        if abs(self.rho_12) > 0 and abs(self.rho_12) >= 0.5 * min(abs(self.rho_1c), abs(self.rho_2c)):
            warnings.warn(
                "rho_12 is not small compared to the qubit-coupler couplings",
                stacklevel=3,
            )
        if self.dimension > MAX_DIMENSION:
            raise DimensionOverflow(
                f"Hilbert space dimension {self.dimension} exceeds cap {MAX_DIMENSION}"
            )

    @property
    def levels(self) -> tuple[int, int, int]:
        return (self.q1.levels, self.q2.levels, self.coupler.levels)

    @property
    def dimension(self) -> int:
        l1, l2, lc = self.levels
        return l1 * l2 * lc

    def index(self, label: HilbertLabel) -> int:
        l1, l2, lc = self.levels
        n1, n2, nc = label
        if not (0 <= n1 < l1 and 0 <= n2 < l2 and 0 <= nc < lc):
            raise ValueError(f"label {label} outside truncation {self.levels}")
        return (n1 * l2 + n2) * lc + nc

    def labels(self) -> list[HilbertLabel]:
        l1, l2, lc = self.levels
        return [HilbertLabel(a, b, c) for a in range(l1) for b in range(l2) for c in range(lc)]

    def operating_point(self, key: str = "idle_frequency") -> float:
        try:
            return float(self.operating_points[key])
        except KeyError:
            raise ConfigError(f"preset {self.name!r} has no operating point {key!r}") from None

    def with_levels(self, levels: int) -> "DeviceParams":
        return self.replace(
            q1=TransmonParams(self.q1.bare_frequency, self.q1.anharmonicity, levels),
            q2=TransmonParams(self.q2.bare_frequency, self.q2.anharmonicity, levels),
            coupler=TunableCouplerParams(
                self.coupler.ej_sum, self.coupler.ec, self.coupler.jj_ratio, levels
            ),
        )

    def replace(self, **changes) -> "DeviceParams":
        from dataclasses import replace

        return replace(self, **changes)

    @cached_property
    def _parts(self):
        return _hamiltonian_parts(self)

    def hamiltonian_parts(self):
        """Return ``(static, number_c, coupling_c)`` with
        ``H(f) = static + f * number_c + sqrt(f) * coupling_c``."""
        return self._parts

    # serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "q1": asdict(self.q1),
            "q2": asdict(self.q2),
            "coupler": asdict(self.coupler),
            "rho_12": self.rho_12,
            "rho_1c": self.rho_1c,
            "rho_2c": self.rho_2c,
        }
        if self.operating_points:
            out["operating_points"] = dict(self.operating_points)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceParams":
        from .schema import validate_preset

        validate_preset(data)
        coupler = dict(data["coupler"])
        if "ej_sum" not in coupler:
            coupler = asdict(
                TunableCouplerParams.from_max_frequency(
                    coupler["f_max"], coupler["ec"], coupler["jj_ratio"], coupler.get("levels", 3)
                )
            )
        try:
            return cls(
                q1=TransmonParams(**data["q1"]),
                q2=TransmonParams(**data["q2"]),
                coupler=TunableCouplerParams(**coupler),
                rho_12=float(data["rho_12"]),
                rho_1c=float(data["rho_1c"]),
                rho_2c=float(data["rho_2c"]),
                name=data.get("name", "custom"),
                operating_points=dict(data.get("operating_points", {})),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def load_device(path_or_name) -> DeviceParams:
    """Load a preset by shipped name (``"measured_device"``) or file path."""
    text = None
    if isinstance(path_or_name, str) and path_or_name in PRESET_NAMES:
        text = resources.files("adiabatic_cz.presets").joinpath(f"{path_or_name}.json").read_text()
    else:
        path = Path(path_or_name)
        if not path.exists():
            raise ConfigError(f"preset file not found: {path}")
        text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"preset is not valid JSON: {exc}") from exc
    return DeviceParams.from_dict(data)


def save_device(device: DeviceParams, path) -> None:
    Path(path).write_text(json.dumps(device.to_dict(), indent=2, sort_keys=True) + "\n")


def decoupled(device: DeviceParams) -> DeviceParams:
    """Same device with every coupling set to zero."""
    return device.replace(rho_12=0.0, rho_1c=0.0, rho_2c=0.0)


# SQUID --------------------------------------------------------------------


def squid_ej(coupler: TunableCouplerParams, flux):
    """Effective Josephson energy (MHz) of the asymmetric SQUID at ``flux``."""
    ej1, ej2 = coupler.junction_energies
    flux = np.asarray(flux, dtype=float)
    val = ej1**2 + ej2**2 + 2.0 * ej1 * ej2 * np.cos(2.0 * np.pi * flux)
    out = np.sqrt(np.maximum(val, 0.0))
    return float(out) if out.ndim == 0 else out


def flux_to_frequency(coupler: TunableCouplerParams, flux):
    """Bare coupler frequency in MHz, ``sqrt(8 E_J(flux) E_C) - E_C``.

    Only meaningful where ``8 E_J E_C > E_C**2``; the formula tends to
    ``-E_C`` as E_J vanishes.
    """
    freq = np.sqrt(8.0 * np.asarray(squid_ej(coupler, flux)) * coupler.ec) - coupler.ec
    return float(freq) if freq.ndim == 0 else freq


def frequency_to_flux(coupler: TunableCouplerParams, target):
    """Flux in [0, 0.5] giving bare coupler frequency ``target`` (MHz).

    Closed-form inversion of :func:`flux_to_frequency` on its monotone branch.
    """
    target_arr = np.asarray(target, dtype=float)
    f_lo, f_hi = coupler.f_min, coupler.f_max
    tol = 1e-9 * max(abs(f_hi), 1.0)
    bad = (target_arr < f_lo - tol) | (target_arr > f_hi + tol) | ~np.isfinite(target_arr)
    if np.any(bad):
        idx = int(np.flatnonzero(np.atleast_1d(bad))[0])
        val = float(np.atleast_1d(target_arr)[idx])
        raise OutOfRange(
            f"coupler frequency {val:.6f} MHz outside SQUID band [{f_lo:.6f}, {f_hi:.6f}]",
            index=idx if target_arr.ndim else None,
        )
    ej1, ej2 = coupler.junction_energies
    ej = (np.clip(target_arr, f_lo, f_hi) + coupler.ec) ** 2 / (8.0 * coupler.ec)
    cos_arg = (ej**2 - ej1**2 - ej2**2) / (2.0 * ej1 * ej2)
    flux = np.arccos(np.clip(cos_arg, -1.0, 1.0)) / (2.0 * np.pi)
    return float(flux) if flux.ndim == 0 else flux


def frequency_to_flux_bisect(coupler: TunableCouplerParams, target: float) -> float:
    """Bisection inverse of :func:`flux_to_frequency` (independent check)."""
    if not coupler.f_min <= target <= coupler.f_max:
        raise OutOfRange(f"coupler frequency {target} MHz outside SQUID band")
    if target == coupler.f_max:
        return 0.0
    if target == coupler.f_min:
        return 0.5
    return brentq(lambda x: flux_to_frequency(coupler, x) - target, 0.0, 0.5, xtol=1e-15, rtol=1e-15)


# couplings and Hamiltonian --------------------------------------------------


def coupling_g(rho: float, f_a, f_b):
    """Coupling strength (MHz) between modes at frequencies ``f_a``, ``f_b``."""
    g = rho * np.sqrt(np.asarray(f_a, dtype=float) * np.asarray(f_b, dtype=float))
    return float(g) if g.ndim == 0 else g


def annihilation(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels, dtype=float)), k=1)


def mode_operators(levels: tuple[int, int, int]) -> Iterator[np.ndarray]:
    """Annihilation operators of qubit 1, qubit 2 and coupler on the product space."""
    eyes = [np.eye(n) for n in levels]
    for k, n in enumerate(levels):
        mats = list(eyes)
        mats[k] = annihilation(n)
        yield np.kron(np.kron(mats[0], mats[1]), mats[2])


def _ladder(a: np.ndarray, freq: float, anharm: float) -> np.ndarray:
    n = np.real(np.diag(a.T @ a))
    return np.diag(freq * n + 0.5 * anharm * n * (n - 1.0))


def _hamiltonian_parts(device: DeviceParams):
    a1, a2, ac = mode_operators(device.levels)
    x1, x2, xc = a1 + a1.T, a2 + a2.T, ac + ac.T
    f1, f2 = device.q1.bare_frequency, device.q2.bare_frequency
    static = (
        _ladder(a1, f1, device.q1.anharmonicity)
        + _ladder(a2, f2, device.q2.anharmonicity)
        + _ladder(ac, 0.0, device.coupler.anharmonicity)
        + coupling_g(device.rho_12, f1, f2) * (x1 @ x2)
    )
    number_c = np.diag(np.real(np.diag(ac.T @ ac)))
    coupling_c = (device.rho_1c * math.sqrt(f1)) * (x1 @ xc) + (device.rho_2c * math.sqrt(f2)) * (
        x2 @ xc
    )
    # the products above commute, so each term is already exactly symmetric
    return static, number_c, coupling_c


def build_hamiltonian(device: DeviceParams, coupler_freq: float) -> np.ndarray:
    """System Hamiltonian in MHz at bare coupler frequency ``coupler_freq``.

    Couplings to the coupler use ``g_jc = rho_jc * sqrt(f_j * f_c)`` with the
    instantaneous bare coupler frequency.
    """
    if not coupler_freq > 0:
        raise ValueError("coupler frequency must be positive")
    static, number_c, coupling_c = device.hamiltonian_parts()
    return static + coupler_freq * number_c + math.sqrt(coupler_freq) * coupling_c


def bare_energies(device: DeviceParams, coupler_freq: float) -> np.ndarray:
    """Uncoupled ladder energies (MHz) in basis order."""
    return np.diag(build_hamiltonian(decoupled(device), coupler_freq)).copy()
