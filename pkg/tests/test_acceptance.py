"""Acceptance criteria, one test each. Every test prints its pass/fail line.

Tolerances are pinned in ``clshare.acceptance`` and ``clshare.report``:
compute within a factor of 2 of the reference formula, byte totals within
25 %, 1000 registrations under 5 s, 100 round trips per primitive, 100 tamper
runs, 20 collusion attempts, whole suite under 60 s.
"""
import time

import pytest

from clshare import acceptance as acc

_elapsed: dict[int, float] = {}


@pytest.mark.parametrize("check", acc.CRITERIA, ids=[c.__name__ for c in acc.CRITERIA])
def test_criterion(check, capsys):
    t = time.perf_counter()
    outcome = check()
    _elapsed[outcome.number] = time.perf_counter() - t
    with capsys.disabled():
        print(" " + outcome.line())
    assert outcome.ok, outcome.line()


def test_suite_runtime_budget(capsys):
    assert len(_elapsed) == len(acc.CRITERIA), "run the whole module to measure the suite"
    total = sum(_elapsed.values())
    with capsys.disabled():
        print(f" [{'PASS' if total < acc.SUITE_BUDGET_S else 'FAIL'}] suite runtime {total:.1f}s "
              f"(budget {acc.SUITE_BUDGET_S:.0f}s)")
    assert total < acc.SUITE_BUDGET_S


def test_pinned_tolerances():
    from clshare import report
    assert (report.FACTOR, report.BYTE_TOL) == (2.0, 0.25)
    assert (report.SEGDS_BYTES_REF, report.SEDDS_BYTES_REF) == (1500, 526)
    assert (acc.REGISTRATIONS, acc.REGISTRATION_BUDGET_S, acc.ROUNDTRIPS, acc.TAMPER_RUNS,
            acc.COLLUSION_ATTEMPTS, acc.SUITE_BUDGET_S) == (1000, 5.0, 100, 100, 20, 60.0)
