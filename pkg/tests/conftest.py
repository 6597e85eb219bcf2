import numpy as np
import pytest
from hypothesis import settings

from auxsurv import build_grid

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture
def unit_grid():
    """4 x 4 window cells inside an 8 x 8 extended grid over the unit square."""
    return build_grid(np.array([[0.0, 0.0], [1.0, 1.0]]), 3, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None and rep.when == "call":
        detail = dict(item.user_properties).get("detail", "")
        _CRITERIA.append((mark.args[0], mark.args[1], rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(_CRITERIA):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {num} ({title}): {detail}")
