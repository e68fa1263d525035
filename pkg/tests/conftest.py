import math

import pytest

from ringbus.device import bundled_path, load_bundled_device
from ringbus.inversion import load_measurement_set
from ringbus.ring import LinearizedQubit, RingSpec, calibrate_coupling_cap

SPECIAL_HZ = 4.65e9


@pytest.fixture(scope="session")
def ring():
    return RingSpec()


@pytest.fixture(scope="session")
def calibrated_cg(ring):
    return calibrate_coupling_cap(4.74e6, math.pi, SPECIAL_HZ, LinearizedQubit.from_frequency(SPECIAL_HZ), ring)


@pytest.fixture(scope="session")
def qubit(calibrated_cg):
    return LinearizedQubit.from_frequency(SPECIAL_HZ, 63e-15, calibrated_cg)


@pytest.fixture(scope="session")
def paper_device():
    return load_bundled_device()


@pytest.fixture(scope="session")
def measured_set():
    return load_measurement_set(bundled_path("tableII.json"))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
