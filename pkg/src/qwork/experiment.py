"""Wiring for the driven two-level example: state, process and decomposition."""
from functools import cached_property

import numpy as np

from .model import DrivenTwoLevel
from .propagator import DEFAULT_TOL, evolve
from .qcore import hermitian_eigensystem
from .workdist import build_work_distribution

FIG1_OMEGA0 = 0.01
FIG1_OMEGA = 0.01
FIG1_T = 100.0
FIG1_THETAS = (np.pi / 16, np.pi / 8, np.pi / 4)


def pure_state(theta):
    """rho for |psi> = cos(theta)|1> + sin(theta)|2>."""
    psi = np.array([np.cos(theta), np.sin(theta)], dtype=complex)
    return np.outer(psi, psi.conj())


class TwoLevelExperiment:
    """One driving process; the propagator is computed once and reused."""

    def __init__(self, omega0=FIG1_OMEGA0, omega=FIG1_OMEGA, t=FIG1_T, tol_propagator=DEFAULT_TOL):
        self.sched = DrivenTwoLevel(omega0, omega)
        self.t = float(t)
        self.tol_propagator = tol_propagator

    @cached_property
    def propagation(self):
        return evolve(self.sched, self.t, self.tol_propagator)

    @property
    def unitary(self):
        return self.propagation.unitary

    @cached_property
    def e0(self):
        return hermitian_eigensystem(self.sched.at(0.0))

    @cached_property
    def et(self):
        return hermitian_eigensystem(self.sched.at(self.t))

    def decomposition(self, theta, scheme):
        return build_work_distribution(pure_state(theta), self.e0, self.et, self.unitary, scheme)
