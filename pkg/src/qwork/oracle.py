"""Brute-force reference for Gaussian two-point work statistics.

The joint probability of the two energy readings is evaluated by literal
matrix products of the measurement operators, and the work density by
quadrature along the line ``E_t - E_0 = w``. Nothing in here knows about
mixture components; it only sees operators and eigensystems.
"""
from dataclasses import dataclass

import numpy as np

from .qcore import ContractError, dagger

MAX_POINTS = 2 ** 18


class OracleConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureGrid:
    e0_range: tuple
    et_range: tuple
    n0: int = 400
    nt: int = 400
    rule: str = "simpson"

    def __post_init__(self):
        for n in (self.n0, self.nt):
            if n < 200 or n % 2:
                raise ContractError(f"point counts must be even and >= 200, got {n}")
        if self.rule != "simpson":
            raise ContractError("only composite Simpson is supported")

    @classmethod
    def covering(cls, e0, et, sigma, per_sigma=10):
        """Grid spanning every eigenvalue +- 10 sigma with ~``per_sigma`` points per sigma."""
        r0 = (float(e0.values.min() - 10 * sigma), float(e0.values.max() + 10 * sigma))
        rt = (float(et.values.min() - 10 * sigma), float(et.values.max() + 10 * sigma))

        def count(r):
            n = int(np.ceil((r[1] - r[0]) / sigma * per_sigma))
            return max(200, n + n % 2)

        return cls(r0, rt, count(r0), count(rt))

    def validate(self, e0, et, sigma):
        ok0 = self.e0_range[0] <= e0.values.min() - 10 * sigma and self.e0_range[1] >= e0.values.max() + 10 * sigma
        okt = self.et_range[0] <= et.values.min() - 10 * sigma and self.et_range[1] >= et.values.max() + 10 * sigma
        if not (ok0 and okt):
            raise ContractError("quadrature grid does not cover eigenvalues +- 10 sigma")


def measurement_operator(eig, energy, sigma):
    """Gaussian pointer operator M_E = sum_n (2 pi sigma^2)^(-1/4) exp(-(e_n - E)^2 / 4 sigma^2) |n><n|.

    ``energy`` may be an array; the result then has a leading axis.
    """
    e = np.asarray(energy, dtype=float)
    amp = (2 * np.pi * sigma ** 2) ** -0.25 * np.exp(-(eig.values - e[..., None]) ** 2 / (4 * sigma ** 2))
    v = eig.vectors
    return (v * amp[..., None, :]) @ dagger(v)


def joint_probability(rho, e0, et, u, sigma, E0, Et):
    """Tr[M_Et U M_E0 rho M_E0^dag U^dag M_Et^dag]; broadcasts over E0/Et arrays."""
    if not sigma > 0:
        raise ContractError("sigma must be > 0")
    E0, Et = np.broadcast_arrays(np.asarray(E0, float), np.asarray(Et, float))
    m0 = measurement_operator(e0, E0, sigma)
    mt = measurement_operator(et, Et, sigma)
    inner = m0 @ rho @ dagger(m0)
    outer = mt @ (u @ inner @ dagger(u)) @ dagger(mt)
    p = np.trace(outer, axis1=-2, axis2=-1).real
    return p if p.ndim else float(p)


def simpson_weights(n, h):
    w = np.ones(n + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return w * h / 3


def _line_integral(rho, e0, et, u, sigma, lo, hi, n, ws):
    h = (hi - lo) / n
    e0_pts = lo + h * np.arange(n + 1)
    wts = simpson_weights(n, h)
    out = np.empty(len(ws))
    for i, w in enumerate(ws):
        out[i] = wts @ joint_probability(rho, e0, et, u, sigma, e0_pts, e0_pts + w)
    return out


def marginal_work_density(rho, e0, et, u, sigma, grid, w, tol=1e-8):
    """P(W = w) = integral of P(E0 + w, E0) dE0, doubling n0 until stable to ``tol``."""
    grid.validate(e0, et, sigma)
    ws = np.atleast_1d(np.asarray(w, dtype=float))
    lo, hi = grid.e0_range
    n = grid.n0
    prev = _line_integral(rho, e0, et, u, sigma, lo, hi, n, ws)
    while True:
        if 2 * n > MAX_POINTS:
            raise OracleConvergenceError(f"marginal did not converge within {MAX_POINTS} points")
        n *= 2
        cur = _line_integral(rho, e0, et, u, sigma, lo, hi, n, ws)
        if np.max(np.abs(cur - prev)) < tol:
            return cur if np.ndim(w) else float(cur[0])
        prev = cur


def total_probability(rho, e0, et, u, sigma, grid):
    """Double Simpson integral of the joint probability over the grid."""
    grid.validate(e0, et, sigma)
    h0 = (grid.e0_range[1] - grid.e0_range[0]) / grid.n0
    ht = (grid.et_range[1] - grid.et_range[0]) / grid.nt
    x0 = grid.e0_range[0] + h0 * np.arange(grid.n0 + 1)
    xt = grid.et_range[0] + ht * np.arange(grid.nt + 1)
    E0, Et = np.meshgrid(x0, xt, indexing="ij")
    p = joint_probability(rho, e0, et, u, sigma, E0, Et)
    return float(simpson_weights(grid.n0, h0) @ p @ simpson_weights(grid.nt, ht))
