import numpy as np
import pytest

from aictrack import PRESETS, run_episode

# filled by test_acceptance.py, printed at the end of the session
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def short_simo():
    """A 2 s tuned SIMO run with dropouts on both links."""
    return run_episode("simo", PRESETS["simo-tuned"].replace(horizon=2.0))
