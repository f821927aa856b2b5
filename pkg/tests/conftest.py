import os

import pytest
from hypothesis import settings

from circuit_dilation.circuit import constant_model
from circuit_dilation.netlist import REFERENCE_NETLIST, compile_text

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture
def reference_model():
    """L0 = C0 = 1, R0 = 0.2, M0 = 0.3, no drive."""
    return compile_text(REFERENCE_NETLIST)


@pytest.fixture
def lc_model():
    return constant_model(1.0, 1.0, 0.0, 0.0)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
