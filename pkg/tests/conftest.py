import numpy as np
import pytest

from xbar_energy.cli import resolve_cell_model

_ACCEPTANCE = {}


def record_acceptance(number, title, ok, detail=""):
    _ACCEPTANCE[number] = (title, bool(ok), detail)


@pytest.fixture(scope="session")
def models():
    return {cid: resolve_cell_model(cid) for cid in "ABCD"}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[number]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {title}: {detail}")
