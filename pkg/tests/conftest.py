import time
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
import pytest

from driftbounds.chains import DriftSpec, FiniteChain, MinorizationSpec, extract_minorization
from driftbounds.errors import DegenerateMinorizationError
from driftbounds.oracle import minimal_drift_spec, random_lazy_reversible_chain

SUITE_SIZE = 120
SUITE_SEED = 20240611


@dataclass
class SuiteCase:
    chain: FiniteChain
    C: tuple
    mino: MinorizationSpec
    drift: DriftSpec


def build_suite(count=SUITE_SIZE, seed=SUITE_SEED, max_n=12):
    """Random lazy reversible chains with a small set whose extracted
    minorization is nondegenerate, plus drift data built from hitting times."""
    rng = np.random.default_rng(seed)
    cases = []
    while len(cases) < count:
        n = int(rng.integers(3, max_n + 1))
        chain = random_lazy_reversible_chain(rng, n, density=float(rng.uniform(0.3, 0.9)))
        size = int(rng.integers(1, max(2, n // 2) + 1))
        C = tuple(sorted(int(c) for c in rng.choice(n, size=size, replace=False)))
        try:
            mino = extract_minorization(chain, C)
        except DegenerateMinorizationError:
            continue
        drift = minimal_drift_spec(chain, C)
        cases.append(SuiteCase(chain=chain, C=C, mino=mino, drift=drift))
    return cases


@pytest.fixture(scope="session")
def random_suite():
    return build_suite()


_ACCEPTANCE_LINES = []


def record_acceptance(line: str):
    _ACCEPTANCE_LINES.append(line)


@contextmanager
def criterion(number: int, title: str, budget: float):
    """Record a PASS/FAIL line for one acceptance criterion, including its
    wall time against ``budget`` seconds."""
    start = time.perf_counter()
    notes = []
    try:
        yield notes
    except BaseException:
        elapsed = time.perf_counter() - start
        record_acceptance(f"[{number:02d}] FAIL  {title} ({elapsed:.1f}s)")
        raise
    elapsed = time.perf_counter() - start
    detail = "; ".join(notes)
    status = "PASS" if elapsed <= budget else "FAIL"
    record_acceptance(f"[{number:02d}] {status}  {title} ({elapsed:.1f}s){'  ' + detail if detail else ''}")
    assert elapsed <= budget, f"took {elapsed:.1f}s, budget {budget}s"


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
