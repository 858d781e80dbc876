import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from redflash import load_mixture  # noqa: E402
from redflash.reduction import build_reduction_basis  # noqa: E402

# acceptance criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def y8():
    return load_mixture("y8")


@pytest.fixture(scope="session")
def my10():
    return load_mixture("my10")


@pytest.fixture(scope="session")
def c2c7():
    return load_mixture("c2c7")


@pytest.fixture(scope="session")
def mixtures(y8, my10):
    return {"y8": y8, "my10": my10}


def basis_at(mix, T):
    return build_reduction_basis(mix, mix.eos, T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
