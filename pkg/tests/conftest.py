import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from zonalmc.manifolds import Ellipsoid2DChart, Ellipsoid3DChart, FlatTorusChart, Sphere2Chart
from zonalmc.perturbation import BumpProfile, build_commuting_bump
from zonalmc.profiles import Profile
from zonalmc.zonal import zonal_flow_3d

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# certified scenario: a=2, X = d_xi, f a bump on chi in (0.35, 0.95)
CERT_A = 2.0
CERT_PROFILE = Profile.bump(0.65, 0.3)
CERT_BUMP = BumpProfile(center_t=0.0, center_chi=0.5, radius=0.12, amplitude=1.0, t_radius=2.5)


@pytest.fixture(scope="session")
def chart3():
    return Ellipsoid3DChart(CERT_A)


@pytest.fixture(scope="session")
def chart2():
    return Ellipsoid2DChart(2.0)


@pytest.fixture(scope="session")
def sphere():
    return Sphere2Chart()


@pytest.fixture(scope="session")
def torus():
    return FlatTorusChart(2)


@pytest.fixture(scope="session")
def cert_flow(chart3):
    return zonal_flow_3d(chart3, 1, 0, CERT_PROFILE)


@pytest.fixture(scope="session")
def cert_Y(chart3, cert_flow):
    return build_commuting_bump(chart3, cert_flow, CERT_BUMP)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, passed: bool, detail: str) -> bool:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
