import importlib
from datetime import datetime

import numpy as np
import pytest

from cellcast import _pykernels

try:
    _ckernels = importlib.import_module("cellcast._ckernels")
except ImportError:
    _ckernels = None

KERNEL_BACKENDS = [pytest.param(_pykernels, id="python")]
KERNEL_BACKENDS.append(
    pytest.param(_ckernels, id="cython", marks=pytest.mark.skipif(_ckernels is None, reason="extension not built"))
)

MARCH_1 = datetime(2021, 3, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=KERNEL_BACKENDS)
def kernel_module(request):
    return request.param


@pytest.fixture
def use_backend(monkeypatch, kernel_module):
    """Route the package's kernel calls through one backend."""
    from cellcast import kernels

    monkeypatch.setattr(kernels, "combined_error", kernel_module.combined_error)
    monkeypatch.setattr(kernels, "impute_weekly", kernel_module.impute_weekly)
    return kernel_module


# acceptance criteria: number -> (title, outcome, detail)
_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    report = outcome.get_result()
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        detail = dict(item.user_properties).get("detail", "")
        verdict = "PASS" if report.passed else "FAIL"
        if _ACCEPTANCE.get(number, (None, "PASS"))[1] == "FAIL":
            verdict = "FAIL"
        _ACCEPTANCE[number] = (title, verdict, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict, detail = _ACCEPTANCE[number]
        line = f"[{number:2d}] {verdict}  {title}"
        terminalreporter.write_line(f"{line}  ({detail})" if detail else line)
