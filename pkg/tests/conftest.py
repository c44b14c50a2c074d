"""Shared fixtures and the brute-force reference used across the suite.

``brute_force`` enumerates every assignment with plain numpy column
products over the stored terms; it shares no code with ``evaluate`` or the
kernels, so it serves as an independent oracle.
"""

import os
import sys

import numpy as np
import pytest

from qbb.model import QuboModel

HERE = os.path.dirname(os.path.abspath(__file__))
DOUBLE = os.path.join(HERE, "oracle_double.py")


def all_assignments(n: int) -> np.ndarray:
    """Every binary vector of length n; row r holds the bits of r (bit 0 = variable 0)."""
    return ((np.arange(1 << n, dtype=np.int64)[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def energies(model: QuboModel, X: np.ndarray) -> np.ndarray:
    e = np.full(len(X), model.offset)
    Xf = X.astype(np.float64)
    for (i, j), c in model.terms.items():
        e += c * (Xf[:, i] if i == j else Xf[:, i] * Xf[:, j])
    return e


def brute_force(model: QuboModel) -> tuple[float, np.ndarray]:
    """(minimum, all minimisers) by exhaustive enumeration."""
    if model.n == 0:
        return model.offset, np.zeros((1, 0), dtype=np.uint8)
    X = all_assignments(model.n)
    e = energies(model, X)
    lo = e.min()
    return float(lo), X[e == lo]


def eq2_model() -> QuboModel:
    # 2 x1 x2 + 2 x1 x3 + 2 x2 x3 - x1 - x2 - x3
    return QuboModel(3, {(0, 1): 2, (0, 2): 2, (1, 2): 2, (0, 0): -1, (1, 1): -1, (2, 2): -1})


def eq3_model() -> QuboModel:
    # 4 x1 x2 - 2 x1 x3 - 8 x1 x4 - 4 x2 x4 + 8 x3 x4
    return QuboModel(4, {(0, 1): 4, (0, 2): -2, (0, 3): -8, (1, 3): -4, (2, 3): 8})


def double_cmd(*args: str) -> list[str]:
    return [sys.executable, DOUBLE, *args]


@pytest.fixture
def eq2():
    return eq2_model()


@pytest.fixture
def eq3():
    return eq3_model()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in results:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
