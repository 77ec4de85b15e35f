import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cstarlab.fdca import BlockElement, BlockShape  # noqa: E402
from cstarlab.matcore import DEFAULT_TOL  # noqa: E402
from cstarlab.opalg import generate_algebra  # noqa: E402


def unit(n, i, j):
    m = np.zeros((n, n), dtype=complex)
    m[i, j] = 1.0
    return m


@pytest.fixture(scope="session")
def t2():
    shape = BlockShape((2,))
    gens = [BlockElement(shape, (unit(2, i, j),)) for i, j in ((0, 0), (0, 1), (1, 1))]
    return generate_algebra(shape, gens, ("p", "e", "q"), DEFAULT_TOL)


@pytest.fixture(scope="session")
def pi_id():
    """Upper-triangular 2 x 2 matrices embedded as x -> (x_11, x) in C + M2."""
    from cstarlab.scenarios import pi_oplus_id_algebra
    return pi_oplus_id_algebra()


@pytest.fixture(scope="session")
def m3():
    shape = BlockShape((3,))
    gens = [BlockElement(shape, (unit(3, i, j),)) for i in range(3) for j in range(3) if (i, j) != (0, 0)]
    return generate_algebra(shape, gens, tuple(f"e{i}{j}" for i in range(3) for j in range(3) if (i, j) != (0, 0)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.LINES:
        terminalreporter.write_line(line)
