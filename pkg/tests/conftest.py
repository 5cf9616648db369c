import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config.stash[_RESULTS] = {}


@pytest.fixture
def detail(request):
    """Mutable dict; its items are printed next to the criterion's verdict."""
    d = {}
    request.node._criterion_detail = d
    return d


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    info = getattr(item, "_criterion_detail", {})
    text = ", ".join(f"{k}={v:.2e}" if isinstance(v, float) else f"{k}={v}" for k, v in info.items())
    if rep.failed and call.excinfo is not None and not info:
        text = call.excinfo.exconly().splitlines()[0][:160]
    item.config.stash[_RESULTS][mark.args[0]] = (rep.passed, text)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash[_RESULTS]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, text = results[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {text}")
