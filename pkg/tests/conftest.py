import sys

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from qwork.experiment import TwoLevelExperiment


@pytest.fixture(scope="session")
def fig1():
    exp = TwoLevelExperiment()
    exp.unitary
    return exp


def ode_propagator(sched, t, rtol=1e-13):
    """High-order adaptive integration of i dU/dt = H(t) U from U(0) = I."""
    d = sched.dim

    def rhs(tau, y):
        u = (y[: d * d] + 1j * y[d * d:]).reshape(d, d)
        du = (-1j * sched.at(tau) @ u).ravel()
        return np.concatenate([du.real, du.imag])

    y0 = np.concatenate([np.eye(d).ravel(), np.zeros(d * d)])
    sol = solve_ivp(rhs, (0.0, t), y0, method="DOP853", rtol=rtol, atol=rtol)
    y = sol.y[:, -1]
    return (y[: d * d] + 1j * y[d * d:]).reshape(d, d)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for i in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[i])
