import pytest

CRITERIA = {
    1: "noiseless baselines",
    2: "GUE channel average",
    3: "faulty swap equals swap omission",
    4: "parity decay vs closed form, Q slope",
    5: "swap-only double parity, W slope",
    6: "combined double parity, Q' slope",
    7: "dissipative rescaling",
    8: "estimator suite",
    9: "identity and property suite",
    10: "device curves (declared), kind agreement",
}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")
    config.stash[_KEY] = {}


_KEY = pytest.StashKey[dict]()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    store = item.config.stash[_KEY].setdefault(marker.args[0], {"tests": {}, "notes": []})
    if report.when == "call" or (report.when == "setup" and not report.passed):
        store["tests"][item.nodeid] = report.outcome
    if report.when == "call":
        store["notes"].extend(v for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        entry = store.get(n)
        if entry is None or not entry["tests"]:
            status = "NOT RUN"
        elif all(v == "passed" for v in entry["tests"].values()):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {status:7s} {CRITERIA[n]}")
        for note in (entry or {}).get("notes", []):
            terminalreporter.write_line(f"    {note}")
