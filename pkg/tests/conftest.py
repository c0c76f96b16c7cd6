import numpy as np
import pytest

_criteria: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: needs the public benchmark datasets")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "states": []})
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        entry["states"].append("SKIP" if rep.skipped else ("PASS" if rep.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        states = entry["states"]
        if "FAIL" in states:
            verdict = "FAIL"
        elif states and all(s == "SKIP" for s in states):
            verdict = "SKIP"
        elif states:
            verdict = "PASS"
        else:
            verdict = "NOT RUN"
        tr.write_line(f"criterion {number:>2}  {verdict:<4}  {entry['title']}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
