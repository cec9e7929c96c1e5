import time

import numpy as np
import pytest

from platoonlab import SpeedDropProfile
from platoonlab.sim import Perturbation, Scenario, run

# the canonical regression setup: 20 -> 10 m/s over 500 m, T = 1 s
V0 = 20.0
RHO = 0.5
DROP_START = 0.0
DROP_LENGTH = 500.0
T_HEADWAY = 1.0


@pytest.fixture(scope="session")
def drop_profile():
    return SpeedDropProfile(
        v0=V0, rho=RHO, drop_start=DROP_START, drop_length=DROP_LENGTH
    )


@pytest.fixture(scope="session")
def upstream_profile():
    """Same drop parameters but pushed far downstream, so short runs stay
    in the constant 20 m/s region."""
    return SpeedDropProfile(v0=V0, rho=RHO, drop_start=1e6, drop_length=DROP_LENGTH)


def make_regression_scenario(perturbations=()):
    profile = SpeedDropProfile(
        v0=V0, rho=RHO, drop_start=DROP_START, drop_length=DROP_LENGTH
    )
    return Scenario(
        n=100,
        T=T_HEADWAY,
        profile=profile,
        x1_start=-100.0,
        duration=260.0,
        dt=0.01,
        record_interval=0.1,
        perturbations=tuple(perturbations),
    )


@pytest.fixture(scope="session")
def scenario1_run():
    start = time.perf_counter()
    trajectory = run(make_regression_scenario())
    return trajectory, time.perf_counter() - start


@pytest.fixture(scope="session")
def scenario1_trajectory(scenario1_run):
    return scenario1_run[0]


@pytest.fixture(scope="session")
def scenario2_trajectory():
    return run(make_regression_scenario([Perturbation(vehicle=3, dx=10.0)]))


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


# ---------------------------------------------------------------------
# acceptance reporting: one line per criterion at the end of the run
# ---------------------------------------------------------------------

_acceptance_results = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    label = None
    if report.when == "call":
        label = getattr(item.function, "_criterion", None)
    if label is not None:
        if hasattr(report, "wasxfail"):
            status = "EXPECTED FAIL (documented model limitation)"
        else:
            status = report.outcome.upper()
        _acceptance_results.append((label, status))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for label, status in _acceptance_results:
        terminalreporter.write_line(f"{label}: {status}")
