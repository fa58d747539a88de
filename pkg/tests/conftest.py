import time

import pytest

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title, budget): acceptance criterion n with a runtime budget in seconds")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    start = time.perf_counter()
    yield
    item.user_properties.append(("elapsed", time.perf_counter() - start))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    n, title, budget = mark.args
    entry = _RESULTS.setdefault(n, {"title": title, "budget": budget, "ok": True, "elapsed": 0.0, "notes": []})
    entry["ok"] &= rep.passed
    entry["elapsed"] += dict(item.user_properties).get("elapsed", 0.0)
    for key, value in item.user_properties:
        if key == "detail":
            entry["notes"].append(value)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_RESULTS):
        e = _RESULTS[n]
        in_budget = e["elapsed"] <= e["budget"]
        status = "PASS" if e["ok"] and in_budget else "FAIL"
        tr.write_line(f"{status}  [{n}] {e['title']}  ({e['elapsed']:.1f} s of {e['budget']:g} s)")
        if not in_budget:
            tr.write_line("        runtime budget exceeded")
        for note in e["notes"]:
            tr.write_line(f"        {note}")
