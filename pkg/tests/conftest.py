import numpy as np
import pytest

from xviewbev.synthetic import canonical_box_scene, render_synthetic

_criteria = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    passed = call.excinfo is None
    notes = ", ".join(f"{k}={v}" for k, v in item.user_properties)
    _criteria.append((number, title, passed, notes))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, notes in sorted(_criteria):
        line = f"AC{number:<2} {'PASS' if passed else 'FAIL'}  {title}"
        if notes:
            line += f"  ({notes})"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def canonical_render():
    return render_synthetic(canonical_box_scene())
