import numpy as np
import pytest

from nsbesov import SpectrumProfile, make_grid, random_field

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def grid8():
    return make_grid(3, 8)


@pytest.fixture(scope="session")
def grid16():
    return make_grid(3, 16)


@pytest.fixture(scope="session")
def grid32():
    return make_grid(3, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_background_field(grid16):
    """Solenoidal ``U`` with sup norm 0.05 (Neumann series converges fast)."""
    V = random_field(grid16, SpectrumProfile(0.0, 3.0, 7))
    return V * (0.05 / np.abs(V.physical()).max())


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(label: str, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running numerical checks")

