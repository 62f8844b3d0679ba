import warnings

import numpy as np
import pytest

from adiabatic_cz.device import DeviceParams, TransmonParams, TunableCouplerParams, load_device


@pytest.fixture(scope="session")
def measured():
    return load_device("measured_device")


@pytest.fixture(scope="session")
def sym():
    return load_device("sym_comparison")


@pytest.fixture(scope="session")
def asym():
    return load_device("asym_comparison")


@pytest.fixture(scope="session")
def uncoupled(measured):
    return measured.replace(rho_12=0.0, rho_1c=0.0, rho_2c=0.0)


def small_device(f1=5000.0, f2=7000.0, rho_1c=0.004, rho_2c=0.0, rho_12=0.0, levels=2, f_max=6000.0):
    """Two-level toy modes; the coupler is tunable up to ``f_max``."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return DeviceParams(
            TransmonParams(f1, -200.0, levels),
            TransmonParams(f2, -200.0, levels),
            TunableCouplerParams.from_max_frequency(f_max, 200.0, 1.5, levels),
            rho_12, rho_1c, rho_2c,
        )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
