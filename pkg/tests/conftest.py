import math

import numpy as np
import pytest
from scipy.optimize import brentq


def scalar_norm(terms, x):
    """Luxemburg norm by plain root bracketing, independent of the library.

    ``terms(i)`` gives the list of exponents of ``M_i`` (coefficients are 1).
    """
    x = np.abs(np.asarray(x, dtype=float))
    if not np.any(x):
        return 0.0
    idx = np.flatnonzero(x) + 1
    vals = x[idx - 1]

    def g(rho):
        return sum(sum((v / rho) ** e for e in terms(i)) for i, v in zip(idx, vals)) - 1.0

    lo, hi = 1e-3 * vals.max(), 10.0 * vals.sum() + 10.0
    while g(lo) < 0:
        lo /= 2
    while g(hi) > 0:
        hi *= 2
    return brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def modular_terms(p, i0=None):
    if i0 is None:
        i0 = math.ceil(p / (p - 2))
    return lambda i: (p, p * (1 - 1 / (i + i0)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
