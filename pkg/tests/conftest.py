import numpy as np
import pytest

from mortemu.config import bundled_config


@pytest.fixture(scope="session")
def chencox_config():
    return bundled_config("chen-cox")


@pytest.fixture(scope="session")
def twopop_config():
    return bundled_config("two-pop")


@pytest.fixture(scope="session")
def cbd_config():
    return bundled_config("cbd")


def within_se(sample, target, k=3.0):
    sample = np.asarray(sample, dtype=float)
    se = sample.std(ddof=1) / np.sqrt(sample.size)
    return abs(sample.mean() - target) <= k * se + 1e-12


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
