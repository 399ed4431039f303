import numpy as np
import pytest


def bump(X, Y, cx, cy, R):
    """C-infinity bump exp(-1/(1 - r^2/R^2)) supported in the disc of radius R."""
    s = ((X - cx) ** 2 + (Y - cy) ** 2) / R**2
    out = np.zeros_like(s)
    inside = s < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside]))
    return out


def test_spinors(X, Y):
    """Five fixed smooth compactly supported spinors (inside |x|, |y| < 5)."""
    b = lambda cx, cy, R: bump(X, Y, cx, cy, R)
    return [
        np.stack([b(0, 0, 2.5), 0 * X], -1),
        np.stack([b(1, -0.5, 2), 1j * b(1, -0.5, 2)], -1),
        np.stack([X * b(0.5, 0.5, 2.5), Y * b(-1, 0, 3)], -1),
        np.stack([np.cos(X) * b(0, 1, 2.5), (1 - 1j) * b(0, 0, 3.5)], -1),
        np.stack([b(2, 0, 2) * (1 + X * Y), b(-2, 1, 2.5)], -1),
    ]


test_spinors.__test__ = False


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(verdicts, key=lambda k: int(k[2:])):
        terminalreporter.write_line(verdicts[key])
