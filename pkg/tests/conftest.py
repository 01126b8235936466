import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("gchr", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("gchr")

_verdicts: list[tuple[int, str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        if rep.passed:
            status, detail = "PASS", f"{rep.duration:.2f}s"
        elif rep.skipped:
            status, detail = "SKIP", rep.longrepr[2].removeprefix("Skipped: ")
        else:
            status, detail = "FAIL", rep.longrepr.reprcrash.message if hasattr(rep.longrepr, "reprcrash") \
                else str(rep.longrepr).splitlines()[-1]
        _verdicts.append((marker.args[0], status, marker.args[1], detail))


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, detail in sorted(_verdicts):
        terminalreporter.write_line(f"criterion {number:>2} {status}  {title}  [{detail}]")
