"""Time-ordered propagators by midpoint exponential products."""
from dataclasses import dataclass
import logging

import numpy as np

from .qcore import ContractError, expm_batch, unitarity_residual

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
MAX_STEPS = 2 ** 24
_CHUNK = 2 ** 15


class ConvergenceError(RuntimeError):
    def __init__(self, message, last_estimate=None, steps=None):
        super().__init__(message)
        self.last_estimate = last_estimate
        self.steps = steps


@dataclass(frozen=True, eq=False)
class PropagatorResult:
    unitary: np.ndarray
    steps_used: int
    unitarity_residual: float
    richardson_error_estimate: float


def _ordered_product(mats):
    # later times multiply from the left: U = M_{n-1} ... M_1 M_0
    while len(mats) > 1:
        if len(mats) % 2:
            last = mats[-1:]
            mats = mats[:-1]
        else:
            last = None
        mats = mats[1::2] @ mats[0::2]
        if last is not None:
            mats = np.concatenate([mats, last])
    return mats[0]


def midpoint_product(sched, t, steps, t0=0.0):
    """U = prod_k exp(-i H(t0 + (k + 1/2) h) h) with h = t / steps."""
    d = sched.dim
    h = t / steps
    u = np.eye(d, dtype=complex)
    for start in range(0, steps, _CHUNK):
        k = np.arange(start, min(start + _CHUNK, steps))
        taus = t0 + (k + 0.5) * h
        u = _ordered_product(expm_batch(np.asarray(sched.batch(taus)), h)) @ u
    return u


def evolve(sched, t, tol=DEFAULT_TOL, initial_steps=64, max_steps=MAX_STEPS):
    """Propagator over ``[0, t]``, halving the step until two levels agree to ``tol``.

    The accepted unitary is the finer of the last two levels; its error is
    estimated as one third of their Frobenius difference.
    """
    if not t >= 0:
        raise ContractError(f"duration must be >= 0, got {t}")
    if not tol > 0:
        raise ContractError(f"tol must be > 0, got {tol}")
    d = sched.dim
    if t == 0:
        return PropagatorResult(np.eye(d, dtype=complex), 0, 0.0, 0.0)
    steps = max(1, int(initial_steps))
    prev = midpoint_product(sched, t, steps)
    while True:
        if 2 * steps > max_steps:
            raise ConvergenceError(
                f"propagator did not converge to tol={tol:.1e} within {max_steps} steps",
                last_estimate=prev, steps=steps)
        steps *= 2
        cur = midpoint_product(sched, t, steps)
        diff = float(np.linalg.norm(cur - prev))
        log.debug("evolve: steps=%d diff=%.3e", steps, diff)
        if diff < tol:
            return PropagatorResult(cur, steps, unitarity_residual(cur), diff / 3.0)
        prev = cur
