"""Shared fixtures.

The expensive objects (monomial expansions, the optimized 4x4 codebooks) are
session-scoped.  Set SLMIMO_TEST_DESIGN_CACHE to a writable JSON path to skip
re-running the ~2.5 minute codebook optimization between test sessions; the
cached books are re-verified against the design condition before use.
"""

import os

import numpy as np
import pytest

from slmimo import design, eigenstats, matrices, structure

ACCEPTANCE_LINES = []


def record_acceptance(num: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"acceptance {num:2d}: {status}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def exp22():
    return eigenstats.expand_ordered_pdf(2, 2)


@pytest.fixture(scope="session")
def exp44():
    return eigenstats.expand_ordered_pdf(4, 4)


@pytest.fixture(scope="session")
def exp66():
    return eigenstats.expand_ordered_pdf(6, 6)


@pytest.fixture(scope="session")
def sl_example():
    return structure.analyze_matrix(matrices.A_EXAMPLE)


@pytest.fixture(scope="session")
def qpsk():
    return design.build_base("qam", 4)


@pytest.fixture(scope="session")
def baseline_books(sl_example, qpsk):
    return design.baseline_codebooks(sl_example, qpsk)


@pytest.fixture(scope="session")
def designed_books(sl_example, qpsk):
    """Optimized codebooks for the 4x6 example layering (QPSK base)."""
    cache = os.environ.get("SLMIMO_TEST_DESIGN_CACHE")
    if cache and os.path.exists(cache):
        books = structure.load_codebooks(cache)
        if structure.check_design_condition(sl_example, books).passed:
            return books
    result = design.design_codebooks(sl_example, qpsk)
    if cache:
        structure.save_codebooks(result.books, cache)
    return result.books


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
