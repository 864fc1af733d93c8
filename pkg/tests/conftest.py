import numpy as np
import pytest

from oblesa.core import Bounds, Problem, RandomSource


def sphere_problem(dim=2, budget=10_000, low=-5.0, high=5.0, target=1e-8):
    return Problem(
        objective=lambda x: np.sum(np.atleast_2d(x) ** 2, axis=1),
        bounds=Bounds.cube(low, high, dim),
        target_value=target,
        budget=budget,
    )


@pytest.fixture
def rng():
    return RandomSource(1234)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion, then assert it."""

    def report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
