import numpy as np
import pytest

from dissipation_lab.grid import Grid, SampledField
from dissipation_lab.mollify import KernelProfile, build_kernel


@pytest.fixture(scope="session")
def rho2():
    return build_kernel(KernelProfile(), 2, 17)


@pytest.fixture(scope="session")
def rho1():
    return build_kernel(KernelProfile(), 1, 17)


@pytest.fixture(scope="session")
def rho2_half():
    return build_kernel(KernelProfile(radius=0.5), 2, 17)


def shear_field(n=128, lo=-1.0, hi=1.0):
    g = Grid.from_bounds((lo, lo), (hi, hi), (n, n))
    return SampledField.from_function(
        g, lambda p: np.stack([np.sign(p[:, 1]), np.zeros(len(p))], 1))


def tg_field(n=128):
    g = Grid.from_bounds((0.0, 0.0), (2 * np.pi, 2 * np.pi), (n, n), (True, True))
    return SampledField.from_function(
        g, lambda p: np.stack([np.sin(p[:, 0]) * np.cos(p[:, 1]),
                               -np.cos(p[:, 0]) * np.sin(p[:, 1])], 1))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
