import math

import pytest
from hypothesis import settings

from hybridmeas.model import HybridParams, HybridState

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

# filled by test_acceptance.py, printed at the end of the session
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def chaotic():
    return HybridParams(gamma_cl=0.25)


@pytest.fixture
def harmonic():
    return HybridParams(A=-1.0, B=0.0, Lambda=0.0, lambda_c=0.0)


@pytest.fixture
def free_particle():
    return HybridParams(A=-1.0, B=0.0, Lambda=0.0, lambda_c=0.0, omega=0.0, tau=math.inf)


@pytest.fixture
def chaotic_init(chaotic):
    return HybridState.default(chaotic)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
