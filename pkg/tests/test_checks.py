"""The invariant suites behind `check`."""

import numpy as np
import pytest

from errors import InvariantViolationError
from harness.checks import CHECKS, check_choose_b_table, check_failure_inequality, run_all_checks


def test_every_suite_passes():
    results = run_all_checks(seed=20240917)
    assert [r.name for r in results] == [c.__name__.removeprefix("check_") for c in CHECKS]
    failed = [r.detail for r in results if not r.passed]
    assert failed == []


def test_failure_is_reported(monkeypatch):
    monkeypatch.setattr("harness.checks.choose_b", lambda n, eps: 0)
    with pytest.raises(InvariantViolationError, match="choose_b table"):
        check_choose_b_table(np.random.default_rng(0))


def test_stop_on_failure(monkeypatch):
    monkeypatch.setattr("harness.checks.choose_b", lambda n, eps: 0)
    results = run_all_checks(seed=1, stop_on_failure=True)
    assert not results[-1].passed
    assert results[-1].name == "choose_b_table"


def test_failure_inequality_covers_full_grid(monkeypatch):
    visited = []

    class Report:
        def check_invariants(self):
            pass

    def record(basis, k, prepared):
        visited.append((basis, prepared.dimension, k))
        return Report()

    monkeypatch.setattr("harness.checks.eigenbasis", lambda hamiltonian: hamiltonian.size)
    monkeypatch.setattr("harness.checks.overlap_analysis", record)
    check_failure_inequality()
    assert len(visited) == 2 * 5 * 6 * 3
    assert all(n == dim for n, dim, _ in visited)
    assert {n for n, _, _ in visited} == {n0 << s for n0 in (8, 16, 32, 64, 128) for s in range(6)}
