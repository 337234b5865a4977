import numpy as np
import pytest

N_CRITERIA = 10


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    # criterion number -> (passed, detail), filled by test_acceptance.py
    config.acceptance = {}


def pytest_terminal_summary(terminalreporter, config):
    results = config.acceptance
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in results:
            passed, detail = results[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d}: FAIL  (not run or errored before reporting)")
