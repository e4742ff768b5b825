import numpy as np
import pytest

from topodeeponet.spaces import MeasurementSpace, trig_family


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def l2_space():
    return MeasurementSpace.l2_interval(32)


@pytest.fixture(scope="session")
def antideriv_family(l2_space):
    return trig_family(l2_space, [("cos", 1), ("sin", 1), ("sin", 2)], (-0.25, 0.25))


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
