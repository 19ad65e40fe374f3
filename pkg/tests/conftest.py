from pathlib import Path

import numpy as np
import pytest

from adjpriv import nn


def finite_diff_check(fn, arrays, grads, h=1e-5, floor=1e-5):
    """Max relative error between analytic ``grads`` and central differences of ``fn``.

    ``fn`` is re-evaluated after perturbing each coordinate of each array in place.
    Coordinates smaller than ``floor`` are compared on an absolute scale: below
    it the difference quotient itself is dominated by rounding.
    """
    worst = 0.0
    for arr, g in zip(arrays, grads):
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = fn()
            flat[i] = old - h
            down = fn()
            flat[i] = old
            num = (up - down) / (2 * h)
            denom = max(abs(num), abs(gflat[i]), floor)
            worst = max(worst, abs(num - gflat[i]) / denom)
    return worst


@pytest.fixture
def tiny_spec():
    return nn.NetworkSpec.chain([4, 6, 3], ["relu", "log_softmax"])


ADULT_DIR = Path(__file__).resolve().parents[1] / "data" / "adult"
ADULT_FILES = [ADULT_DIR / "adult.data", ADULT_DIR / "adult.test"]


@pytest.fixture(scope="session")
def adult_raw():
    if not all(p.exists() for p in ADULT_FILES):
        pytest.skip("Adult files not present")
    from adjpriv.data import read_adult
    return read_adult(ADULT_FILES)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
