"""Time-dependent Hamiltonians.

Every schedule exposes ``dim``, ``at(tau)`` returning a ``(d, d)`` Hermitian
array, and ``batch(taus)`` returning a ``(n, d, d)`` stack.
"""
from dataclasses import dataclass

import numpy as np

from .qcore import SIGMA_X, SIGMA_Z, ContractError, EigenSystem, fix_phase, require_hermitian


@dataclass(frozen=True)
class DrivenTwoLevel:
    """H(tau) = omega0 sigma_z + g sin(omega tau) sigma_x with g = 1."""

    omega0: float
    omega: float
    g: float = 1.0

    dim = 2

    def __post_init__(self):
        if self.g != 1.0:
            raise ContractError("drive strength is the energy unit; g must be 1")
        if not self.omega0 >= 0:
            raise ContractError(f"omega0 must be >= 0, got {self.omega0}")
        if not self.omega > 0:
            raise ContractError(f"omega must be > 0, got {self.omega}")

    @property
    def period(self):
        return 2 * np.pi / self.omega

    def at(self, tau):
        return hamiltonian_at(self, tau)

    def batch(self, taus):
        taus = np.asarray(taus, dtype=float)
        s = self.g * np.sin(self.omega * taus)
        out = np.zeros((len(taus), 2, 2), dtype=complex)
        out[:, 0, 0] = -self.omega0
        out[:, 1, 1] = self.omega0
        out[:, 0, 1] = s
        out[:, 1, 0] = s
        return out


def hamiltonian_at(sched, tau):
    tau = float(tau)
    if not np.isfinite(tau):
        raise ContractError("tau must be finite")
    return sched.omega0 * SIGMA_Z + sched.g * np.sin(sched.omega * tau) * SIGMA_X


def transient_gap_half(sched, tau):
    s = np.sin(sched.omega * tau)
    return float(np.sqrt(sched.omega0 ** 2 + s * s))


def transient_eigensystem(sched, tau):
    """Closed-form instantaneous eigensystem of the driven two-level system.

    Eigenvalues are -eps, +eps with eps = sqrt(omega0^2 + sin^2(omega tau)).
    At omega0 = 0 and sin(omega tau) = 0 the canonical basis is returned.
    """
    s = float(np.sin(sched.omega * tau))
    w0 = float(sched.omega0)
    eps = float(np.hypot(w0, s))
    a = w0 + eps
    if a == 0.0:
        return EigenSystem(values=np.zeros(2), vectors=np.eye(2, dtype=complex))
    norm = np.hypot(a, s)
    # divide in real arithmetic: complex division overflows for subnormal norms
    v1 = (np.array([a, -s]) / norm).astype(complex)
    v2 = (np.array([s, a]) / norm).astype(complex)
    return EigenSystem(
        values=np.array([-eps, eps]),
        vectors=np.column_stack([fix_phase(v1), fix_phase(v2)]),
    )


class HamiltonianSchedule:
    """Generic schedule backed by a callable ``evaluator(tau) -> (d, d) array``."""

    def __init__(self, evaluator, dim, t_final=None):
        self.evaluator = evaluator
        self.dim = int(dim)
        self.t_final = t_final

    def at(self, tau):
        h = require_hermitian(self.evaluator(float(tau)))
        if h.shape != (self.dim, self.dim):
            raise ContractError(f"evaluator returned shape {h.shape}, expected {(self.dim, self.dim)}")
        return h

    def batch(self, taus):
        return np.stack([self.at(t) for t in np.asarray(taus, dtype=float)])


class ConstantSchedule(HamiltonianSchedule):
    def __init__(self, h, t_final=None):
        h = require_hermitian(h)
        super().__init__(lambda tau: h, h.shape[0], t_final)
        self._h = h

    def batch(self, taus):
        return np.broadcast_to(self._h, (len(taus),) + self._h.shape)


class TabulatedSchedule(HamiltonianSchedule):
    """Piecewise-linear interpolation of Hamiltonian samples ``hs`` at ``times``."""

    def __init__(self, times, hs):
        times = np.asarray(times, dtype=float)
        hs = np.asarray(hs, dtype=complex)
        if times.ndim != 1 or len(times) < 2 or np.any(np.diff(times) <= 0):
            raise ContractError("times must be a strictly increasing array of length >= 2")
        if hs.shape[0] != len(times):
            raise ContractError("one Hamiltonian sample per time point is required")
        for h in hs:
            require_hermitian(h)
        self.times = times
        self.hs = hs
        super().__init__(None, hs.shape[1], times[-1])

    def batch(self, taus):
        taus = np.clip(np.asarray(taus, dtype=float), self.times[0], self.times[-1])
        k = np.clip(np.searchsorted(self.times, taus, side="right") - 1, 0, len(self.times) - 2)
        frac = (taus - self.times[k]) / (self.times[k + 1] - self.times[k])
        return (1 - frac)[:, None, None] * self.hs[k] + frac[:, None, None] * self.hs[k + 1]

    def at(self, tau):
        return self.batch([tau])[0]


class ShiftedSchedule:
    """``base`` viewed from time ``offset`` onward: H'(tau) = H(tau + offset)."""

    def __init__(self, base, offset):
        self.base = base
        self.offset = float(offset)
        self.dim = base.dim

    def at(self, tau):
        return self.base.at(tau + self.offset)

    def batch(self, taus):
        return self.base.batch(np.asarray(taus, dtype=float) + self.offset)
