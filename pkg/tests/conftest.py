import numpy as np
import pytest

from flagmeasures.polytope import build, cube, simplex

ACCEPTANCE_LINES: list[str] = []


def record(line: str) -> None:
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def unit_cube():
    return cube(3)


@pytest.fixture(scope="session")
def unit_simplex():
    return simplex(3)


def random_polytope(seed: int, n: int = 8, d: int = 3):
    gen = np.random.default_rng(seed)
    pts = np.round(gen.standard_normal((n, d)) * 8) / 8
    return build([tuple(str(x) for x in p) for p in pts])


@pytest.fixture(scope="session")
def random_polys():
    return [random_polytope(s) for s in range(5)]
