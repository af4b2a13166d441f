from __future__ import annotations

from fractions import Fraction

import pytest

from tsn5g_syncsim.harness.config import ClockConfig, DemoConfig, ScenarioConfig

_acceptance: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(criterion): exit criterion of the build")


def pytest_runtest_logreport(report):
    marker = getattr(report, "acceptance", None)
    if marker and (report.when == "call" or report.outcome != "passed"):
        key, title = marker
        prev = _acceptance.get(key, ("passed", title))[0]
        outcome = "failed" if "failed" in (prev, report.outcome) else report.outcome
        _acceptance[key] = (outcome, title)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m:
        report.acceptance = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_acceptance, key=lambda k: int(k[2:])):
        outcome, title = _acceptance[key]
        terminalreporter.write_line(f"{key} {'PASS' if outcome == 'passed' else 'FAIL'}  {title}")


def clocks(offset_ns=0, drift_ppm=0, granularity_ns=1) -> ClockConfig:
    return ClockConfig(offset_ns, Fraction(drift_ppm), granularity_ns)


def scenario(name: str, **kw) -> ScenarioConfig:
    kw.setdefault("demo", DemoConfig(enabled=False))
    return ScenarioConfig(scenario=name, **kw)
