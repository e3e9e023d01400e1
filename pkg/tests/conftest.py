import numpy as np
import pytest

from photonlink.physics import CycleTiming, DeviceParams, Environment


@pytest.fixture(scope="session")
def ref_dev() -> DeviceParams:
    return DeviceParams(kappa=2 * np.pi * 1e9, gamma=2 * np.pi * 1e5)


@pytest.fixture(scope="session")
def ref_timing() -> CycleTiming:
    return CycleTiming(t_c=230e-9, delta_o=35e-9, t_w=48e-9)


@pytest.fixture(scope="session")
def ref_env() -> Environment:
    return Environment(t_e=8.0, nu=1e10, cycles_per_symbol=800)


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: full-size acceptance criteria (slow; deselect with -m 'not acceptance')"
    )
