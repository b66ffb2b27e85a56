import numpy as np
import pytest

from mcpa import DeviceParams, reference_device


@pytest.fixture
def device() -> DeviceParams:
    return reference_device()


@pytest.fixture
def toy_device() -> DeviceParams:
    """Mild rate spread, for tests that must run an explicit integrator."""
    return DeviceParams(
        cavity_freq_hz=1e6,
        mech_freq_hz=5e3,
        kappa_hz=2.0,
        eta=0.7,
        gamma_m_hz=0.5,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
