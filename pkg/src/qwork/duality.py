"""Level predictability, coherence effectiveness and their trade-off.

For an initial state split into populations and coherences in the initial
energy basis, ``d_w`` measures how well the per-level work distributions
can be told apart and ``v_w`` the L1 mass of the coherent work distribution.
Every valid POVM satisfies ``d_w**2 + v_w**2 <= 1``; a violation is raised
as :class:`BoundViolation` rather than clamped.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import math

import numpy as np
from scipy import integrate, optimize
from scipy.special import erf

from .experiment import TwoLevelExperiment, pure_state
from .model import transient_eigensystem
from .propagator import DEFAULT_TOL as PROP_TOL, evolve
from .qcore import ContractError, as_operator, dagger, is_density, is_unitary
from .workdist import (DEFAULT_QUAD_TOL, MeasurementScheme, MixtureDistribution, WorkDecomposition,
                       evaluate, integrate_abs, support_window)

BOUND_SLACK = 1e-9
EPS_CANDIDATES = ("eps2", "half_gap", "full_gap")


class BoundViolation(AssertionError):
    """A duality inequality failed; ``provenance`` names the offending input."""

    def __init__(self, message, provenance=None):
        super().__init__(message)
        self.provenance = provenance or {}


class ResolutionError(ValueError):
    pass


@dataclass
class DualityReport:
    d_w: float
    v_w: float
    c: float
    c_tilde: float
    d_state: float
    v_state: float
    bound_residual: float
    sum_residual: float
    c_trace_norm: float = float("nan")
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


@dataclass
class ProofChainReport:
    bins: list
    sum_v: float
    d_w_discrete: float
    v_w_upper_discrete: float
    chain_residual: float
    v_w_discrete: float = float("nan")
    delta_w: float = float("nan")
    refinement: list = field(default_factory=list)


def _check_pops(rho_diag, d):
    p = np.asarray(rho_diag, dtype=float)
    if p.shape != (d,):
        raise ContractError(f"expected {d} populations, got shape {p.shape}")
    if abs(p.sum() - 1) > 1e-9 or np.any(p < -1e-12):
        raise ContractError(f"populations must be a probability vector, sum={p.sum():.12g}")
    return p


def predictability(decomp, rho_diag=None, tol=DEFAULT_QUAD_TOL):
    d = decomp.dim
    if d < 2:
        raise ContractError("predictability needs at least two levels")
    p = _check_pops(decomp.populations if rho_diag is None else rho_diag, d)
    total = 0.0
    for m in range(d):
        for n in range(m + 1, d):
            diff = decomp.per_level[m].scaled(p[m]) - decomp.per_level[n].scaled(p[n])
            # (m, n) and (n, m) contribute the same integral
            total += 2 * integrate_abs(diff, tol)
    return total / (2 * (d - 1))


def effectiveness(decomp, tol=DEFAULT_QUAD_TOL):
    return integrate_abs(decomp.coherent, tol) / (decomp.dim - 1)


def coherence_l1(r):
    r = np.asarray(r)
    return float(np.abs(r).sum() - np.abs(r.diagonal()).sum())


def coherence_trace_norm(r):
    r = np.asarray(r)
    off = r - np.diag(r.diagonal())
    return float(np.abs(np.linalg.eigvalsh(0.5 * (off + dagger(off)))).sum())


def duality_report(decomp, rho=None, tol=DEFAULT_QUAD_TOL, provenance=None):
    """Assemble every duality quantity for one decomposition.

    ``rho`` (lab basis), if given, is checked against the decomposition's
    energy-basis state by comparing spectra.
    """
    d = decomp.dim
    r = decomp.rho_energy
    if rho is not None:
        rho = as_operator(rho)
        if np.max(np.abs(np.linalg.eigvalsh(rho) - np.linalg.eigvalsh(r))) > 1e-9:
            raise ContractError("rho does not match the state the decomposition was built from")
    pops = decomp.populations
    d_w = predictability(decomp, pops, tol)
    v_w = effectiveness(decomp, tol)
    c = coherence_l1(r)
    off = ~np.eye(d, dtype=bool)
    c_tilde = float((np.abs(r)[off] * decomp.pair_damping[off]).sum())
    d_state = float(np.abs(pops[:, None] - pops[None, :]).sum() / (2 * (d - 1)))
    prov = {"dim": d, "scheme": decomp.scheme.kind, "sigma": decomp.scheme.sigma}
    prov.update(provenance or {})
    rep = DualityReport(
        d_w=d_w, v_w=v_w, c=c, c_tilde=c_tilde, d_state=d_state, v_state=c / (d - 1),
        bound_residual=1.0 - d_w ** 2 - v_w ** 2, sum_residual=math.sqrt(2) - d_w - v_w,
        c_trace_norm=coherence_trace_norm(r), provenance=prov,
    )
    check_report(rep)
    return rep


def check_report(rep):
    d = rep.provenance.get("dim", 2)
    problems = []
    if not -BOUND_SLACK <= rep.d_w <= 1 + BOUND_SLACK:
        problems.append(f"d_w={rep.d_w!r} outside [0, 1]")
    if rep.v_w > rep.c / (d - 1) + BOUND_SLACK:
        problems.append(f"v_w={rep.v_w!r} exceeds c/(d-1)={rep.c / (d - 1)!r}")
    if rep.bound_residual < -BOUND_SLACK:
        problems.append(f"d_w^2 + v_w^2 = {1 - rep.bound_residual!r} > 1")
    if problems:
        raise BoundViolation("; ".join(problems) + f" for {rep.provenance}", rep.provenance)


# ---------------------------------------------------------------- closed forms

def _two_level_amplitudes(sched, t, tol_propagator=PROP_TOL, unitary=None):
    u = evolve(sched, t, tol_propagator).unitary if unitary is None else unitary
    et = transient_eigensystem(sched, t)
    # amp[m, j] = <eps_m^t| U |j>, j over the bare basis (|1>, |2>)
    return dagger(et.vectors) @ u, et


def closed_form_predictability_2level(theta, sched, t, sigma, tol=1e-11, unitary=None):
    """Four-Gaussian absolute integral for the driven two-level system."""
    if not sigma > 0:
        raise ContractError("sigma must be > 0")
    amp, et = _two_level_amplitudes(sched, t, unitary=unitary)
    p = np.abs(amp) ** 2
    c2, s2 = math.cos(theta) ** 2, math.sin(theta) ** 2
    e1, e2 = et.values
    w0 = sched.omega0
    sw = math.sqrt(2) * sigma
    coef = np.array([c2 * p[0, 0], c2 * p[1, 0], -s2 * p[0, 1], -s2 * p[1, 1]])
    means = np.array([e1 + w0, e2 + w0, e1 - w0, e2 - w0])

    def signed(w):
        z = (np.asarray(w, dtype=float)[..., None] - means) / sw
        return np.exp(-0.5 * z * z) @ coef / (math.sqrt(2 * math.pi) * sw)

    lo, hi = means.min() - 12 * sw, means.max() + 12 * sw
    # |f| has kinks where f changes sign; split the integral there
    probe = np.linspace(lo, hi, 4001)
    y = signed(probe)
    roots = [optimize.brentq(lambda x: float(signed(x)), probe[i], probe[i + 1], xtol=1e-15)
             for i in np.nonzero(y[:-1] * y[1:] < 0)[0]]
    edges = np.unique(np.concatenate([[lo, hi], means, roots]))
    val = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val += integrate.quad(lambda x: abs(float(signed(x))), a, b, limit=500,
                              epsabs=tol / len(edges), epsrel=1e-13)[0]
    return val


def eps_candidates(sched, t):
    et = transient_eigensystem(sched, t)
    e1, e2 = et.values
    return {"eps2": float(e2), "half_gap": float(0.5 * (e2 - e1)), "full_gap": float(e2 - e1)}


def closed_form_effectiveness_2level(theta, sched, t, sigma, eps_convention="eps2", unitary=None):
    """2 C~ |Re[<e1|U|1><2|U^dag|e1>]| erf(eps / 2 sigma) with C~ = |sin 2 theta| exp(-omega0^2 / 2 sigma^2)."""
    if not sigma > 0:
        raise ContractError("sigma must be > 0")
    amp, _ = _two_level_amplitudes(sched, t, unitary=unitary)
    eps = eps_candidates(sched, t)[eps_convention]
    sw = math.sqrt(2) * sigma
    c_tilde = abs(math.sin(2 * theta)) * math.exp(-sched.omega0 ** 2 / sw ** 2)
    return 2 * c_tilde * abs((amp[0, 0] * np.conj(amp[0, 1])).real) * math.erf(eps / (2 * sigma))


@dataclass
class EpsResolution:
    winner: str
    max_deviation: dict
    sigma_grid: list


def resolve_eps_convention(exp, theta, sigma_grid, tol=1e-6):
    """Pick the reading of the unsubscripted final energy that reproduces ``effectiveness``."""
    dev = {k: 0.0 for k in EPS_CANDIDATES}
    for sigma in sigma_grid:
        ref = effectiveness(exp.decomposition(theta, MeasurementScheme.gaussian(sigma)))
        for k in EPS_CANDIDATES:
            cf = closed_form_effectiveness_2level(theta, exp.sched, exp.t, sigma, k, unitary=exp.unitary)
            dev[k] = max(dev[k], abs(cf - ref))
    ok = [k for k in EPS_CANDIDATES if dev[k] < tol]
    if not ok:
        raise ResolutionError(f"no candidate matches the definition route: {dev}")
    return EpsResolution(ok[0], dev, list(sigma_grid))


# ---------------------------------------------------------------- proof chain

def _discrete_chain(decomp, pops, delta_w, lo, hi):
    n = int(math.ceil((hi - lo) / delta_w))
    grid = lo + (np.arange(n) + 0.5) * delta_w
    d = decomp.dim
    mass = np.array([p * evaluate(dist, grid) * delta_w for p, dist in zip(pops, decomp.per_level)])
    mass = np.clip(mass, 0.0, None)
    v_all, u_all = [], []
    for m in range(d):
        for k in range(d):
            if k == m:
                continue
            a, b = mass[m], mass[k]
            v = 0.5 * (a + b)
            with np.errstate(invalid="ignore", divide="ignore"):
                u = np.where(v > 0, np.sqrt(a * b) / v, 0.0)
            v_all.append(v)
            u_all.append(u)
    v = np.concatenate(v_all)
    u = np.concatenate(u_all)
    d_disc = float(np.sum(v * np.sqrt(np.clip(1 - u * u, 0.0, None))) / (d - 1))
    v_upper = float(np.sum(v * u) / (d - 1))
    coh = np.abs(evaluate(decomp.coherent, grid)) * delta_w if len(decomp.coherent) else np.zeros(n)
    return v, u, d_disc, v_upper, float(coh.sum() / (d - 1)), grid


def proof_chain_check(decomp, rho_diag=None, delta_w=1e-3, support=None, refinements=2,
                      tol=DEFAULT_QUAD_TOL):
    """Discretise W into bins and verify each step of the duality argument.

    Returns per-bin ``v_k`` and ``|u_k|`` over all bins and ordered level pairs,
    the normalised mass ``sum_v`` (1 for a resolved grid), the discrete
    predictability and the discrete upper bound on effectiveness. The
    ``refinement`` list holds (delta_w, d_w_discrete, error vs predictability)
    for ``delta_w`` and ``refinements`` successive halvings.
    """
    if decomp.full.has_deltas:
        raise ContractError("proof chain needs pointwise densities; projective scheme has deltas")
    if not delta_w > 0:
        raise ContractError("delta_w must be > 0")
    d = decomp.dim
    pops = _check_pops(decomp.populations if rho_diag is None else rho_diag, d)
    lo, hi = support_window(decomp.full) if support is None else support
    v, u, d_disc, v_upper, v_disc, grid = _discrete_chain(decomp, pops, delta_w, lo, hi)
    sum_v = float(v.sum() / (d - 1))
    if abs(sum_v - 1.0) > 1e-3:
        raise ResolutionError(f"grid too coarse or support too narrow: sum_v = {sum_v:.6f}")
    prov = {"dim": d, "sigma": decomp.scheme.sigma, "delta_w": delta_w}
    if np.any(v < 0) or np.any(u > 1 + 1e-12):
        raise BoundViolation("v_k < 0 or |u_k| > 1 in proof chain", prov)
    if sum_v > 1 + BOUND_SLACK:
        raise BoundViolation(f"sum_v = {sum_v!r} > 1", prov)
    residual = 1.0 - d_disc ** 2 - v_upper ** 2
    if residual < -BOUND_SLACK:
        raise BoundViolation(f"discrete d_w^2 + v_upper^2 = {1 - residual!r} > 1", prov)
    if v_disc > v_upper + BOUND_SLACK:
        raise BoundViolation(f"discrete v_w {v_disc!r} exceeds its upper bound {v_upper!r}", prov)

    exact = predictability(decomp, pops, tol)
    refinement = [(delta_w, d_disc, d_disc - exact)]
    h = delta_w
    for _ in range(refinements):
        h /= 2
        dd = _discrete_chain(decomp, pops, h, lo, hi)[2]
        refinement.append((h, dd, dd - exact))

    bins = [{"v_k": float(a), "u_k_abs": float(b)} for a, b in zip(v, u)]
    return ProofChainReport(bins=bins, sum_v=sum_v, d_w_discrete=d_disc, v_w_upper_discrete=v_upper,
                            chain_residual=residual, v_w_discrete=v_disc, delta_w=delta_w,
                            refinement=refinement)


# ---------------------------------------------------------------- evolved basis

@dataclass(frozen=True, eq=False)
class WorkPOVM:
    """M^W = sum_k N(W | means[k], widths[k]) ops[k], width 0 meaning a delta."""

    means: np.ndarray
    widths: np.ndarray
    ops: np.ndarray

    def conjugated(self, u):
        return WorkPOVM(self.means, self.widths, u @ self.ops @ dagger(u))


def work_povm(e0, et, u, scheme):
    """Operator-valued work POVM of the two-point scheme, in the lab basis."""
    amp = dagger(et.vectors) @ u @ e0.vectors
    d = e0.dim
    means, widths, ops = [], [], []
    if scheme.kind == "projective":
        for m in range(d):
            for n in range(d):
                v = e0.vectors[:, n]
                means.append(et.values[m] - e0.values[n])
                widths.append(0.0)
                ops.append(abs(amp[m, n]) ** 2 * np.outer(v, v.conj()))
    else:
        sw = scheme.work_width
        for m in range(d):
            for n in range(d):
                for k in range(d):
                    damp = math.exp(-(e0.values[n] - e0.values[k]) ** 2 / (8 * scheme.sigma ** 2))
                    # contributes rho_{nk} <m|U|n><k|U^dag|m>, i.e. the operator |k><n|
                    c = amp[m, n] * np.conj(amp[m, k]) * damp
                    means.append(et.values[m] - 0.5 * (e0.values[n] + e0.values[k]))
                    widths.append(sw)
                    ops.append(c * np.outer(e0.vectors[:, k], e0.vectors[:, n].conj()))
    return WorkPOVM(np.array(means), np.array(widths), np.array(ops))


def decompose_with_povm(povm, rho, basis, scheme, damping=None):
    """Split ``rho`` in ``basis`` (an EigenSystem) and push each part through ``povm``."""
    v = basis.vectors
    r = dagger(v) @ rho @ v
    r = 0.5 * (r + dagger(r))
    d = r.shape[0]
    elems = dagger(v) @ povm.ops @ v  # elems[k, i, j] = <b_i| C_k |b_j>
    pops = np.clip(r.diagonal().real, 0.0, None)
    per_level = [MixtureDistribution(elems[:, i, i], povm.means, povm.widths, f"level:{i}")
                 for i in range(d)]
    inc = MixtureDistribution.empty("incoherent")
    for p, dist in zip(pops, per_level):
        inc = inc + dist.scaled(p)
    off = ~np.eye(d, dtype=bool)
    # Tr[C_k rho_c] = sum_{i != j} r_ij <b_j| C_k |b_i>
    cw = np.einsum("ij,kji->k", np.where(off, r, 0), elems)
    coherent = MixtureDistribution(cw, povm.means, povm.widths, "coherent")
    if scheme.kind == "projective" and not np.any(np.abs(cw) > 0):
        coherent = MixtureDistribution.empty("coherent")
    damping = np.ones((d, d)) if damping is None else damping
    mag = np.abs(r)[off]
    factor = float((mag * damping[off]).sum() / mag.sum()) if mag.sum() > 0 else float(damping[off].mean())
    return WorkDecomposition((inc + coherent).relabel("full"), inc.relabel("incoherent"), coherent,
                             per_level, factor, scheme, pops, r, damping)


def evolved_basis_report(rho, u, ht_eigen, scheme, tol=DEFAULT_QUAD_TOL, h0_eigen=None):
    """Duality quantities for rho(t) = U rho U^dag split in the final energy basis.

    The POVM is the conjugated one, U M^W U^dag, so the full work distribution
    is unchanged. There is no first measurement in this split, so the pair
    damping is taken as 1 and ``c_tilde`` equals ``c``. ``h0_eigen`` defaults to
    ``ht_eigen`` (a process with equal initial and final Hamiltonians).
    """
    rho, u = as_operator(rho), as_operator(u)
    if not is_density(rho):
        raise ContractError("rho is not a density matrix")
    if not is_unitary(u):
        raise ContractError("u is not unitary")
    e0 = ht_eigen if h0_eigen is None else h0_eigen
    povm = work_povm(e0, ht_eigen, u, scheme).conjugated(u)
    rho_t = u @ rho @ dagger(u)
    decomp = decompose_with_povm(povm, rho_t, ht_eigen, scheme)
    return duality_report(decomp, tol=tol, provenance={"split": "evolved"})


# ---------------------------------------------------------------- scans

@dataclass
class ScanRow:
    theta: float
    sigma: float
    d_w: float
    v_w: float
    dw2_plus_vw2: float
    dw_plus_vw: float
    c: float
    c_tilde: float
    d_state: float
    v_state: float
    bound_residual: float
    sum_residual: float


@dataclass
class ScanTable:
    rows: list
    argmax: ScanRow

    def best_by_theta(self):
        best = {}
        for row in self.rows:
            cur = best.get(row.theta)
            if cur is None or row.dw_plus_vw > cur.dw_plus_vw:
                best[row.theta] = row
        return best


def scheme_for(sigma):
    return MeasurementScheme.projective() if sigma == 0 else MeasurementScheme.gaussian(sigma)


def scan_row(exp, theta, sigma, tol=DEFAULT_QUAD_TOL):
    decomp = exp.decomposition(theta, scheme_for(sigma))
    rep = duality_report(decomp, tol=tol, provenance={
        "theta": theta, "omega0": exp.sched.omega0, "omega": exp.sched.omega, "t": exp.t})
    return ScanRow(theta=float(theta), sigma=float(sigma), d_w=rep.d_w, v_w=rep.v_w,
                   dw2_plus_vw2=rep.d_w ** 2 + rep.v_w ** 2, dw_plus_vw=rep.d_w + rep.v_w,
                   c=rep.c, c_tilde=rep.c_tilde, d_state=rep.d_state, v_state=rep.v_state,
                   bound_residual=rep.bound_residual, sum_residual=rep.sum_residual)


def _scan_task(args):
    exp, theta, sigma, tol = args
    return scan_row(exp, theta, sigma, tol)


def run_scan(exp, theta_grid, sigma_grid, tol=DEFAULT_QUAD_TOL, workers=1):
    """Rows in (theta, sigma) grid order regardless of ``workers``."""
    exp.unitary  # propagate once before fan-out
    tasks = [(exp, th, s, tol) for th in theta_grid for s in sigma_grid]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_scan_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [_scan_task(t) for t in tasks]


def min_uncertainty_scan(sched, t, theta_grid, sigma_grid, tol=DEFAULT_QUAD_TOL, workers=1,
                         tol_propagator=PROP_TOL):
    if len(theta_grid) == 0 or len(sigma_grid) == 0:
        raise ContractError("theta and sigma grids must be non-empty")
    exp = TwoLevelExperiment(sched.omega0, sched.omega, t, tol_propagator)
    rows = run_scan(exp, theta_grid, sigma_grid, tol, workers)
    best = max(rows, key=lambda r: r.dw_plus_vw)
    return ScanTable(rows, best)


def default_sigma_grid(lo=1e-3, hi=1e2, n=60):
    return np.logspace(np.log10(lo), np.log10(hi), n)


__all__ = [
    "BoundViolation", "DualityReport", "ProofChainReport", "ScanRow", "ScanTable",
    "predictability", "effectiveness", "duality_report", "closed_form_predictability_2level",
    "closed_form_effectiveness_2level", "resolve_eps_convention", "proof_chain_check",
    "evolved_basis_report", "min_uncertainty_scan", "run_scan", "work_povm",
    "decompose_with_povm", "pure_state", "default_sigma_grid",
]
