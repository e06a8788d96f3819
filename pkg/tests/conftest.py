import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(k): acceptance criterion number k")


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for key, val in report.user_properties:
        if key == "criterion":
            detail = dict(report.user_properties).get("detail", "")
            _ACCEPTANCE[val] = ("PASS" if report.passed else "FAIL", detail, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        verdict, detail, dur = _ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {verdict}  ({dur:.1f} s)  {detail}")
