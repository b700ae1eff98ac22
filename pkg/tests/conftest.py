import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# invariant suites run 1000 randomized cases; keep them deterministic
settings.register_profile(
    "invariants",
    max_examples=1000,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.register_profile(
    "default",
    max_examples=100,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

CARRIER_HZ = 28e9
WAVELENGTH = 299792458.0 / CARRIER_HZ


@pytest.fixture(scope="session")
def wavelength():
    return WAVELENGTH


@pytest.fixture(scope="session")
def ula128():
    import nfls

    return nfls.ula(128, WAVELENGTH / 2, reference="center")


@pytest.fixture(scope="session")
def sym257():
    import nfls

    return nfls.symmetric_ula(128, WAVELENGTH / 4)


def assert_allclose(a, b, rtol=1e-12, atol=0.0):
    np.testing.assert_allclose(a, b, rtol=rtol, atol=atol)
