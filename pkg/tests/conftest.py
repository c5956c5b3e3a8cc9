import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], print_blob=True
)
settings.load_profile("default")

# Property suites run at least this many generated cases each.
PROPERTY_EXAMPLES = 1000


@pytest.fixture(scope="session")
def skylake():
    from mess.fixtures import table1_family
    return table1_family("skylake")


@pytest.fixture(scope="session")
def cascadelake():
    from mess.fixtures import table1_family
    return table1_family("cascadelake")


@pytest.fixture(params=["python", "compiled"])
def engine(request):
    from mess.engine import HAVE_KERNEL
    if request.param == "compiled" and not HAVE_KERNEL:
        pytest.skip("compiled kernel not built")
    return request.param


# -- acceptance report ---------------------------------------------------------
# Tests marked ``acceptance("A1", "title")`` get one PASS/FAIL line each in the terminal summary.

_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or not mark.args:
        return
    key, title = mark.args[0], mark.args[1] if len(mark.args) > 1 else ""
    prev = _criteria.get(key)
    failed = report.failed or (prev is not None and prev[1] == "FAIL")
    if report.when == "call" or report.failed:
        _criteria[key] = (title, "FAIL" if failed else "PASS", getattr(report, "duration", 0.0))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria):
        title, status, duration = _criteria[key]
        terminalreporter.write_line(f"{key} {status}  {title}  ({duration:.2f} s)")
