from __future__ import annotations

import io
import json
import time
from contextlib import redirect_stdout

import pytest
from hypothesis import HealthCheck, settings

from parisicut.cli import main

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

PSTAR_ARGS = ["parisi", "pstar", "--betas", "2,4,8,16", "--k", "3"]

_verdicts: list[str] = []
_start = time.perf_counter()
SUITE_BUDGET_S = 30 * 60


def record_verdict(number: str, name: str, ok: bool, detail: str = "") -> None:
    line = f"ACCEPTANCE {number:>3} {'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    _verdicts.append(line)
    print("\n" + line)


def pytest_terminal_summary(terminalreporter):
    elapsed = time.perf_counter() - _start
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for line in _verdicts:
        terminalreporter.write_line(line)
    ok = elapsed <= SUITE_BUDGET_S
    terminalreporter.write_line(
        f"ACCEPTANCE 12b {'PASS' if ok else 'FAIL'}  full suite runtime {elapsed / 60:.1f} min (budget 30 min)")


@pytest.fixture(scope="session")
def pstar_run():
    """One `parisi pstar --betas 2,4,8,16 --k 3` run shared by all tests that need the ladder."""
    buf = io.StringIO()
    t0 = time.perf_counter()
    with redirect_stdout(buf):
        code = main(PSTAR_ARGS)
    elapsed = time.perf_counter() - t0
    return code, json.loads(buf.getvalue()), elapsed
