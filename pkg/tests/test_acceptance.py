"""All twelve acceptance criteria at their stated tolerances.

Each criterion prints one PASS/FAIL line; the lines are also collected and
repeated in the terminal summary (see conftest.py).
"""
import pytest

from gsdelab.acceptance import CRITERIA

LINES = {}


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    res = CRITERIA[number]()
    LINES[number] = res.line()
    print(res.line())
    failed = [r for r in res.rows if not r["ok"]]
    assert res.passed, f"criterion {number} failed: {failed}"
