import numpy as np
import pytest

from tddlink.config import RngStream, SystemConfig, db_to_linear

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def stream():
    return RngStream(2024)


@pytest.fixture
def table_cfg():
    """Eight users, eight antennas, reverse link 10 dB below a 20 dB forward link."""
    return SystemConfig(M=8, K=8, T=30, tau_r=8, rho_f=db_to_linear(20), rho_r=db_to_linear(10))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


class _Criterion:
    def __init__(self):
        self.line = None

    def __call__(self, number, title, passed, detail=""):
        self.line = f"{'PASS' if passed else 'FAIL'} [{number:>2}] {title}: {detail}"
        return passed


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion (errors count as failures)."""
    rec = _Criterion()
    yield rec
    if rec.line is None:
        rec.line = f"FAIL [--] {request.node.name}: raised before reporting"
    ACCEPTANCE_LINES.append(rec.line)
    print(rec.line)
