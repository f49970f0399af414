import numpy as np
import pytest

from corner_bie import (
    GradedMeshSpec,
    build_polygon,
    convergence_ladder,
    make_manufactured,
    recommend_grading,
)

SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]
LSHAPE = [(0, 0), (1, 0), (1, 1), (-1, 1), (-1, -1), (0, -1)]
TRIANGLE = [(0, 0), (1, 0), (0, 1)]


@pytest.fixture(scope="session")
def square():
    return build_polygon(SQUARE)


@pytest.fixture(scope="session")
def lshape():
    return build_polygon(LSHAPE)


@pytest.fixture(scope="session")
def triangle():
    return build_polygon(TRIANGLE)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_LADDERS = {}


def ladder(polygon, order, levels=4, methods=None, profile="smooth"):
    """Convergence ladder from n = 8, cached for the session."""
    key = (polygon.vertices.tobytes(), order, levels, tuple(methods or ()), profile)
    if key not in _LADDERS:
        prob = make_manufactured(polygon, profile)
        q = tuple(recommend_grading(polygon, order))
        kwargs = {"methods": methods} if methods else {}
        _LADDERS[key] = convergence_ladder(prob, GradedMeshSpec((8,) * polygon.r, q), levels, **kwargs)
    return _LADDERS[key]


ACCEPTANCE: dict[str, str] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    """Store one acceptance verdict; printed at the end of the run."""
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[f"{criterion:02d}"] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
