from __future__ import annotations

import functools

import pytest

from artifact.geometry import build_color_code

ACCEPTANCE_LINES: list[str] = []


@functools.lru_cache(maxsize=None)
def code(family: str, d: int):
    return build_color_code(family, d)


@pytest.fixture
def c488_3():
    return code("C488", 3)


@pytest.fixture
def c488_5():
    return code("C488", 5)


@pytest.fixture
def c666_3():
    return code("C666", 3)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
