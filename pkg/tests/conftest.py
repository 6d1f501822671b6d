import os

# the thread-count tests need a pool of at least 8 workers; numba reads this
# once, at import time
os.environ.setdefault("NUMBA_NUM_THREADS", "8")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

import _acceptance_log  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    lines = _acceptance_log.LINES
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
