"""Shared fixtures and the acceptance report hook."""

import numpy as np
import pytest

from qjumps import BathSpec, build_grid, current_series, integrate, make_system, rate_series

# collected by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES = []


def record(criterion, ok: bool, detail: str) -> bool:
    line = f"[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def _solve(system_name, gamma0, detunings, n_modes, t_max, stride=10, window=None):
    spec = BathSpec(gamma0=gamma0, detunings=detunings, n_modes=n_modes,
                    window=window)
    grid = build_grid(spec)
    sysm = make_system(system_name, grid, spec.detunings)
    return integrate(sysm, t_max, 1e-3, stride)


@pytest.fixture(scope="session")
def tla_small():
    """Strongly non-Markovian two-level point, small bath for speed."""
    return _solve("tla", 4.0, (-4.0,), 40, 3.0)


@pytest.fixture(scope="session")
def tla_small_series(tla_small):
    return current_series(tla_small), rate_series(tla_small)


@pytest.fixture(scope="session")
def vsec_small():
    return _solve("v_secular", 4.0, (3.0, -3.0), 48, 2.5)


@pytest.fixture(scope="session")
def vsec_small_series(vsec_small):
    return current_series(vsec_small), rate_series(vsec_small)


@pytest.fixture(scope="session")
def vnon_small():
    return _solve("v_nonsecular", 4.0, (3.0, -3.0), 48, 2.5)
