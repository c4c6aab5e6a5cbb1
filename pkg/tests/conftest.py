import pytest

from gbcf_edt.model import SystemParams

_acceptance: dict[str, list[str]] = {}


@pytest.fixture
def reference_params():
    """sigma_s2 = sigma_z2 = 1, rho_s = 0.9, rho_z = 0.5."""
    return SystemParams(1.0, 0.9, 1.0, 0.5)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    label = dict(report.user_properties).get("acceptance")
    if label is not None:
        _acceptance.setdefault(label, []).append(report.outcome)


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        item.user_properties.append(("acceptance", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_acceptance, key=lambda s: int(s.split()[0][2:])):
        outcomes = _acceptance[label]
        status = "PASS" if all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"{status}  {label}  ({len(outcomes)} checks)")
