import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num, title = marker.args
    entry = _CRITERIA.setdefault(num, {"title": title, "ok": True, "why": []})
    if report.failed:
        entry["ok"] = False
        msg = str(report.longrepr.reprcrash.message) if hasattr(report.longrepr, "reprcrash") else ""
        entry["why"].append(f"{item.name}: {msg.splitlines()[0] if msg else 'failed'}")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        status = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(f"{status} criterion {num:>2}: {e['title']}")
        for why in e["why"]:
            terminalreporter.write_line(f"      {why}")
