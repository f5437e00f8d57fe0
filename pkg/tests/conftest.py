import numpy as np
import pytest

from demri_eval import kernels
from demri_eval.model import LabelMap

ACCEPTANCE_RESULTS = []


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_labelmap(rng, shape=(8, 8, 3), spacing=(1.25, 1.25, 10.0)):
    return LabelMap(rng.integers(0, 5, size=shape), spacing)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] AC{num}: {title} -- {detail}")
