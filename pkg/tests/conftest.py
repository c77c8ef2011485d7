import numpy as np
import pytest

from noisy_kaczmarz import _backend

#: criterion number -> (title, passed, detail); passed is None for a skipped criterion
ACCEPTANCE_RESULTS = {}


def record_acceptance(number, title, passed, detail=""):
    ACCEPTANCE_RESULTS[number] = (title, None if passed is None else bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[number]
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        line = f"[{status}] {number:>2}. {title}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


BACKEND_NAMES = sorted(_backend.BACKENDS)


@pytest.fixture(params=BACKEND_NAMES)
def backend(request):
    return request.param
