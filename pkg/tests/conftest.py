import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from biflow.fields import constant_boundary, great_circle_boundary, great_circle_map, field_from_function  # noqa: E402
from biflow.grid import build_grid  # noqa: E402


@pytest.fixture(scope="session")
def g9():
    return build_grid(9)


@pytest.fixture(scope="session")
def g17():
    return build_grid(17)


@pytest.fixture(scope="session")
def e1_boundary():
    return constant_boundary(m=3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def great_circle(g, alpha=1.0, m=3):
    return field_from_function(g, great_circle_map(alpha, m), sphere=True)


@pytest.fixture(scope="session")
def gc_boundary():
    return great_circle_boundary(0.3)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
