"""Simulation and analysis toolkit for adiabatic CZ gates on coupler-mediated transmons."""

__version__ = "0.1.0"

from .device import (  # noqa: E402
    COMPUTATIONAL,
    DeviceParams,
    HilbertLabel,
    TransmonParams,
    TunableCouplerParams,
    build_hamiltonian,
    coupling_g,
    flux_to_frequency,
    frequency_to_flux,
    load_device,
)
from .errors import *  # noqa: E402,F401,F403

__all__ = [
    "COMPUTATIONAL",
    "DeviceParams",
    "HilbertLabel",
    "TransmonParams",
    "TunableCouplerParams",
    "build_hamiltonian",
    "coupling_g",
    "flux_to_frequency",
    "frequency_to_flux",
    "load_device",
]
