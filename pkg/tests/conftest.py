from __future__ import annotations

import functools

import pytest

from ngsp import Grid, ProblemSpec, make_problem, solve

ACCEPTANCE_LINES: list[str] = []


@functools.lru_cache(maxsize=None)
def cached_solve(name: str, n: int, method: str, scale: float = 1.0, backend: str = "auto"):
    """Solve each (problem, size, method) at most once per session."""
    field = make_problem(ProblemSpec(name, scale=scale))
    return solve(Grid(n), field, [(0.0, 0.0)], method, backend=backend)


@pytest.fixture(scope="session")
def solved():
    return cached_solve


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
