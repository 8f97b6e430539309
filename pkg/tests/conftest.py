import json
import math
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def oracle():
    """Frozen 512-node trapezoid reference values (see oracles/trapezoid_oracle.py)."""
    return json.loads((FIXTURES / "oracle_values.json").read_text())


def rel_change(a, b, floor=1e-15):
    return abs(b - a) / max(abs(a), abs(b), floor)


SQRT2 = math.sqrt(2.0)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; call with (name, ok, detail)."""

    def record(name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
