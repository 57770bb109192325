import pytest

from hexqec.layout import carve_patch, heron
from hexqec.noise import uniform_model


@pytest.fixture(scope="session")
def device():
    return heron()


@pytest.fixture(scope="session")
def p33(device):
    return carve_patch(device, 3, 3)


@pytest.fixture(scope="session")
def p35(device):
    return carve_patch(device, 3, 5)


@pytest.fixture(scope="session")
def p53(device):
    return carve_patch(device, 5, 3)


@pytest.fixture(scope="session")
def model(device):
    return uniform_model(device.qubits, device.edges, 1e-3)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(LINES):
            terminalreporter.write_line(LINES[k])
