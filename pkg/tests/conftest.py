import numpy as np
import pytest

from ctxfuse.imagecore import Image


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


def random_image(rng, h=16, w=16, depth=8):
    return Image.from_array(rng.integers(0, 1 << depth, size=(h, w)), depth)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
