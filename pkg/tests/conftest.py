import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def record(number: int, name: str, passed: bool, detail: str = "") -> None:
    """Register an acceptance outcome; a criterion fails if any of its checks fails."""
    prev = ACCEPTANCE.get(number)
    if prev is not None:
        passed = passed and prev[1]
        detail = f"{prev[2]}; {detail}" if detail else prev[2]
    ACCEPTANCE[number] = (name, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {name}: {detail}")


@pytest.fixture(scope="session")
def random_cloud():
    """10^4 random uniform MPS, D = 2..10, rows (XX, Z, X, Y, D)."""
    from rdmgeom.core import SeededRng
    from rdmgeom.mps import scatter_array
    return scatter_array(10000, 2, 10, SeededRng(seed=2024))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
