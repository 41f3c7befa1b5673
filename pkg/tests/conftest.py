import itertools
import math

import numpy as np
import pytest

from kent.systems import make_finite, make_toral, mat_pow

CAT = ((2, 1), (1, 1))
CAT_PAIR = (CAT, mat_pow(CAT, 2))
LAMBDA_A = (3 + math.sqrt(5)) / 2
TORAL_TARGET = 3 * math.log(LAMBDA_A)


@pytest.fixture(scope="session")
def cat_pair():
    return make_toral(CAT_PAIR)


@pytest.fixture
def square():
    """Unit square corners as a 4-point space with trivial d=1 action."""
    pts = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], float)
    D = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    return make_finite(4, [[0, 1, 2, 3]], D)


# exhaustive subset oracles, independent of the branch-and-bound solvers

def brute_sep(D, eps):
    N = len(D)
    for r in range(N, 0, -1):
        for sub in itertools.combinations(range(N), r):
            if all(D[a, b] >= eps for a, b in itertools.combinations(sub, 2)):
                return r
    return 0


def brute_span(D, eps):
    N = len(D)
    for r in range(1, N + 1):
        for sub in itertools.combinations(range(N), r):
            if all(any(D[x, y] < eps for y in sub) for x in range(N)):
                return r
    return N


def brute_cov(D, eps):
    N = len(D)
    cliques = [frozenset(s) for r in range(1, N + 1) for s in itertools.combinations(range(N), r)
               if all(D[a, b] < eps for a, b in itertools.combinations(s, 2))]
    full = frozenset(range(N))
    for r in range(1, N + 1):
        for fam in itertools.combinations(cliques, r):
            if frozenset().union(*fam) == full:
                return r
    return N


# acceptance lines, echoed at the end of the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: numbered acceptance criteria (slow)")
