import numpy as np
import pytest

from ghk.phase import PhaseSamples, RealPolynomial

_CRITERIA = []


def record(name, ok, detail=""):
    """Print and remember one acceptance line, then assert it."""
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    print(line)
    _CRITERIA.append(line)
    assert ok, line


@pytest.fixture
def criterion():
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


def corrupted_phase(k, n, seed, spacing, junk=0.05, noise=1e-3):
    """Polynomial phase samples with uniform noise and a fraction of junk values."""
    rng = np.random.default_rng(seed)
    P0 = RealPolynomial.random(n, k - 1, rng)
    s = PhaseSamples.on_grid(P0, np.zeros(n), 1.0, spacing)
    v = s.values + noise * rng.uniform(-1, 1, s.values.size)
    bad = rng.random(v.size) < junk
    v[bad] = rng.random(bad.sum())
    return P0, PhaseSamples(s.points, v, s.center, 1.0)
