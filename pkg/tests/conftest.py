import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20241015)


def stencil_laplacian_at(a, i, j, h=1.0):
    """Per-cell 5-point Laplacian with replicate padding, written as plain loops."""
    H, W = a.shape

    def at(r, c):
        return a[min(max(r, 0), H - 1), min(max(c, 0), W - 1)]

    return (at(i + 1, j) + at(i - 1, j) + at(i, j + 1) + at(i, j - 1) - 4 * at(i, j)) / (h * h)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
