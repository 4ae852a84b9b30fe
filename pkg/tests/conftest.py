import numpy as np
import pytest
from hypothesis import settings

from dissim.families import random_atomic, random_commuting

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def record(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture(scope="session")
def atomic_corpus():
    rng = np.random.default_rng(20240501)
    return [random_atomic(rng) for _ in range(50)]


@pytest.fixture(scope="session")
def commuting_corpus():
    rng = np.random.default_rng(20240502)
    return [random_commuting(rng) for _ in range(50)]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
