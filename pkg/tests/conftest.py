"""Shared fixtures: a fast desk-model scenario plus the acceptance recorder."""

from __future__ import annotations

import math

import pytest
from hypothesis import settings

settings.register_profile("ci", deadline=None, derandomize=True, max_examples=50)
settings.load_profile("ci")

# Scaled-down box used by the unit tests: same physics regime as the desk
# default (slits much narrower than the box, several fringes across the
# pattern) at a few-second runtime.
SMALL_SCENARIO = {
    "grid": {"nx": 96, "ny": 96},
    "packet": {"x0": 0.15, "sigma_x": 0.04, "k_x": 60.0},
    "screen": {"thickness": 0.03, "slit_width": 0.06, "slit_separation": 0.25},
    "schedule": {"n_steps": 300},
    "bins": {"delta": 0.0625},
}


@pytest.fixture(scope="session")
def small_config():
    from tsmu.scenario import resolve_config

    return resolve_config(SMALL_SCENARIO)


@pytest.fixture(scope="session")
def small_runtime(small_config):
    from tsmu.scenario import build_runtime

    runtime = build_runtime(small_config)
    runtime.states()
    return runtime


@pytest.fixture(scope="session")
def small_runtime_theta0(small_config):
    from tsmu.scenario import build_runtime

    runtime = build_runtime(small_config.with_overrides(theta=0.0))
    runtime.states()
    return runtime


@pytest.fixture(scope="session")
def small_runtimes_by_theta(small_config, small_runtime, small_runtime_theta0):
    """Runtimes for the record-strength ladder, keyed by angle."""
    from tsmu.scenario import build_runtime

    runtimes = {0.0: small_runtime_theta0, math.pi / 2: small_runtime}
    for theta in (math.pi / 6, math.pi / 4, math.pi / 3):
        runtimes[theta] = build_runtime(small_config.with_overrides(theta=theta))
    return runtimes


# -- acceptance summary ------------------------------------------------------

_ACCEPTANCE_RESULTS: list[tuple[int, str, bool]] = []


class _CriterionRecorder:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACCEPTANCE_RESULTS.append((self.number, self.title, exc_type is None))
        return False


@pytest.fixture(scope="session")
def criterion():
    """Context manager recording one pass/fail line per acceptance criterion."""
    return _CriterionRecorder


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number, title, ok in sorted(set(_ACCEPTANCE_RESULTS)):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} [{status}] {title}")
