"""Work distributions as signed mixtures of Gaussians and Dirac deltas.

A two-point energy measurement with Gaussian pointer states of error sigma
turns every triple of eigen-indices (m; n, n') into a Gaussian in W with
width sqrt(2) sigma. Products of two measurement amplitudes
``g(E_n - E) g(E_n' - E)`` integrate over the first outcome ``E`` to
``exp(-(E_n - E_n')**2 / (8 sigma**2))`` times a unit-mass Gaussian centred at
the pair midpoint, so no further normalisation appears. Projective
measurements are kept exact as delta components.
"""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .qcore import ContractError, as_operator, dagger, is_density, is_unitary

DEFAULT_QUAD_TOL = 1e-9
WINDOW_WIDTHS = 10.0
_SQRT2PI = np.sqrt(2 * np.pi)


@dataclass(frozen=True)
class MeasurementScheme:
    kind: str
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("projective", "gaussian"):
            raise ContractError(f"unknown measurement kind {self.kind!r}")
        if self.kind == "gaussian" and not self.sigma > 0:
            raise ContractError(f"Gaussian measurement needs sigma > 0, got {self.sigma}")
        if self.kind == "projective" and self.sigma != 0:
            raise ContractError("projective measurement has sigma = 0")

    @classmethod
    def projective(cls):
        return cls("projective", 0.0)

    @classmethod
    def gaussian(cls, sigma):
        return cls("gaussian", float(sigma))

    @property
    def work_width(self):
        """Width of each work component, sqrt(2) sigma."""
        return np.sqrt(2.0) * self.sigma


class MixtureComponent(NamedTuple):
    weight: complex
    mean: float
    width: float


@dataclass(frozen=True, eq=False)
class MixtureDistribution:
    """Finite signed mixture; ``width == 0`` marks a Dirac delta."""

    weights: np.ndarray
    means: np.ndarray
    widths: np.ndarray
    label: str = ""

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=complex).ravel()
        mu = np.asarray(self.means, dtype=float).ravel()
        s = np.asarray(self.widths, dtype=float).ravel()
        if not (len(w) == len(mu) == len(s)):
            raise ContractError("weights, means and widths must have equal length")
        if np.any(s < 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(mu)):
            raise ContractError("widths must be >= 0 and weights/means finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "widths", s)

    @classmethod
    def empty(cls, label=""):
        return cls(np.zeros(0, complex), np.zeros(0), np.zeros(0), label)

    @classmethod
    def from_components(cls, components, label=""):
        comps = list(components)
        if not comps:
            return cls.empty(label)
        w, mu, s = zip(*comps)
        return cls(np.array(w, complex), np.array(mu, float), np.array(s, float), label)

    @property
    def components(self):
        return [MixtureComponent(complex(w), float(m), float(s))
                for w, m, s in zip(self.weights, self.means, self.widths)]

    def __len__(self):
        return len(self.weights)

    @property
    def has_deltas(self):
        return bool(np.any(self.widths == 0))

    def total_weight(self):
        return complex(self.weights.sum())

    def relabel(self, label):
        return MixtureDistribution(self.weights, self.means, self.widths, label)

    def scaled(self, factor, label=None):
        return MixtureDistribution(self.weights * factor, self.means, self.widths,
                                   self.label if label is None else label)

    def __add__(self, other):
        return MixtureDistribution(np.concatenate([self.weights, other.weights]),
                                   np.concatenate([self.means, other.means]),
                                   np.concatenate([self.widths, other.widths]), self.label)

    def __neg__(self):
        return self.scaled(-1)

    def __sub__(self, other):
        return self + (-other)

    def to_dict(self):
        return {
            "label": self.label,
            "components": [
                {"re_weight": float(w.real), "im_weight": float(w.imag),
                 "mean": float(m), "width": float(s)}
                for w, m, s in zip(self.weights, self.means, self.widths)
            ],
        }

    @classmethod
    def from_dict(cls, data):
        comps = [(c["re_weight"] + 1j * c["im_weight"], c["mean"], c["width"])
                 for c in data["components"]]
        return cls.from_components(comps, data.get("label", ""))


@dataclass(frozen=True, eq=False)
class WorkDecomposition:
    full: MixtureDistribution
    incoherent: MixtureDistribution
    coherent: MixtureDistribution
    per_level: list
    survived_coherence_factor: float
    scheme: MeasurementScheme
    populations: np.ndarray
    rho_energy: np.ndarray = field(repr=False)
    pair_damping: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return len(self.per_level)


def _normal(x, mean, width):
    z = (x - mean) / width
    return np.exp(-0.5 * z * z) / (_SQRT2PI * width)


def _check_real(re, im, scale):
    if np.any(np.abs(im) > 1e-12 * np.maximum(1.0, scale)):
        worst = float(np.max(np.abs(im)))
        raise ContractError(f"mixture density has imaginary residual {worst:.3e}")


def evaluate(dist, w, bandwidth=None):
    """Density at ``w`` (scalar or array).

    Delta components can only be evaluated once smeared to ``bandwidth``.
    """
    x = np.asarray(w, dtype=float)
    widths = dist.widths
    if dist.has_deltas:
        if bandwidth is None or not bandwidth > 0:
            raise ContractError("pointwise evaluation of delta components needs a bandwidth")
        widths = np.where(widths == 0, bandwidth, widths)
    if len(dist) == 0:
        return np.zeros_like(x) if x.ndim else 0.0
    kern = _normal(x[..., None], dist.means, widths)
    re = kern @ dist.weights.real
    im = kern @ dist.weights.imag
    _check_real(re, im, kern @ np.abs(dist.weights))
    return re if x.ndim else float(re)


def cdf(dist, w):
    """Cumulative distribution; deltas are right-continuous steps."""
    x = np.asarray(w, dtype=float)[..., None]
    safe = np.where(dist.widths > 0, dist.widths, 1.0)
    steps = np.where(dist.widths > 0, ndtr((x - dist.means) / safe),
                     (x >= dist.means).astype(float))
    out = steps @ dist.weights.real
    return out if np.ndim(w) else float(out)


def _merged_deltas(dist):
    mask = dist.widths == 0
    means = dist.means[mask]
    weights = dist.weights[mask].real
    if len(means) == 0:
        return np.zeros(0), np.zeros(0)
    order = np.argsort(means, kind="stable")
    means, weights = means[order], weights[order]
    out_m, out_w = [means[0]], [weights[0]]
    for m, w in zip(means[1:], weights[1:]):
        if m - out_m[-1] <= 1e-12 * max(1.0, abs(m)):
            out_w[-1] += w
        else:
            out_m.append(m)
            out_w.append(w)
    return np.array(out_m), np.array(out_w)


def support_window(dist):
    g = dist.widths > 0
    if not np.any(g):
        return float(dist.means.min()), float(dist.means.max())
    reach = WINDOW_WIDTHS * dist.widths[g].max()
    return float(dist.means.min() - reach), float(dist.means.max() + reach)


def _gauss_part(dist):
    g = (dist.widths > 0) & (dist.weights != 0)
    return dist.weights[g].real, dist.means[g], dist.widths[g]


def _density_fn(w, mu, s):
    def f(x):
        x = np.asarray(x, dtype=float)
        return _normal(x[..., None], mu, s) @ w
    return f


def _breakpoints(mu, s, lo, hi):
    pairs = np.unique(np.round(np.column_stack([mu, s]), 14), axis=0)
    offs = np.linspace(-WINDOW_WIDTHS, WINDOW_WIDTHS, 41)
    pts = (pairs[:, :1] + pairs[:, 1:] * offs).ravel()
    pts = np.concatenate([[lo, hi], pts[(pts > lo) & (pts < hi)]])
    pts = np.unique(pts)
    keep = np.concatenate([[True], np.diff(pts) > 1e-14 * max(1.0, hi - lo)])
    return pts[keep]


def _sign_roots(f, pts, probes=8):
    xs = np.concatenate([np.linspace(a, b, probes, endpoint=False) for a, b in zip(pts[:-1], pts[1:])]
                        + [pts[-1:]])
    ys = f(xs)
    roots = []
    g = lambda x: float(f(x))
    for i in np.nonzero(np.sign(ys[:-1]) * np.sign(ys[1:]) < 0)[0]:
        # batched and scalar evaluation can round differently right at a root
        if g(xs[i]) * g(xs[i + 1]) < 0:
            roots.append(brentq(g, xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15))
    return np.array(roots)


def _adaptive_simpson_abs(f, pts, tol, max_depth=40):
    a, b = pts[:-1], pts[1:]
    total_len = pts[-1] - pts[0]
    total = 0.0
    for _ in range(max_depth):
        if len(a) == 0:
            break
        m = 0.5 * (a + b)
        h = b - a
        fa, fb, fm = np.abs(f(a)), np.abs(f(b)), np.abs(f(m))
        fl, fr = np.abs(f(0.5 * (a + m))), np.abs(f(0.5 * (m + b)))
        s1 = h / 6 * (fa + 4 * fm + fb)
        s2 = h / 12 * (fa + 4 * fl + 2 * fm + 4 * fr + fb)
        err = np.abs(s2 - s1) / 15
        ok = err <= tol * h / total_len
        total += float(np.sum((s2 + (s2 - s1) / 15)[ok]))
        a, b = np.concatenate([a[~ok], m[~ok]]), np.concatenate([m[~ok], b[~ok]])
    else:
        if len(a):
            m = 0.5 * (a + b)
            total += float(np.sum((b - a) / 6 * (np.abs(f(a)) + 4 * np.abs(f(m)) + np.abs(f(b)))))
    return total


def integrate_abs(dist, tol=DEFAULT_QUAD_TOL):
    """Integral of |f(W)| over the real line.

    Deltas contribute the modulus of their merged weight exactly; the Gaussian
    part is integrated by adaptive Simpson over mean +- 10 widths with the
    sign changes of f inserted as breakpoints.
    """
    if not tol > 0:
        raise ContractError(f"tol must be > 0, got {tol}")
    _, dw = _merged_deltas(dist)
    total = float(np.abs(dw).sum())
    w, mu, s = _gauss_part(dist)
    if len(w) == 0:
        return total
    lo = float((mu - WINDOW_WIDTHS * s.max()).min())
    hi = float((mu + WINDOW_WIDTHS * s.max()).max())
    f = _density_fn(w, mu, s)
    pts = _breakpoints(mu, s, lo, hi)
    roots = _sign_roots(f, pts)
    if len(roots):
        pts = np.unique(np.concatenate([pts, roots]))
    return total + _adaptive_simpson_abs(f, pts, tol)


def trace_distance(a, b, tol=DEFAULT_QUAD_TOL):
    return 0.5 * integrate_abs(a - b, tol)


def energy_basis_state(rho, e0):
    """Density matrix elements <E0_i| rho |E0_j>, exactly Hermitian."""
    r = dagger(e0.vectors) @ rho @ e0.vectors
    return 0.5 * (r + dagger(r))


def transition_amplitudes(u, e0, et):
    """A[m, n] = <Et_m| U |E0_n>."""
    return dagger(et.vectors) @ u @ e0.vectors


def build_work_distribution(rho, e0, et, u, scheme):
    rho = as_operator(rho)
    u = as_operator(u)
    if not is_density(rho):
        raise ContractError("rho is not a density matrix (Hermitian, unit trace, PSD)")
    if not is_unitary(u):
        raise ContractError("u is not unitary")
    d = rho.shape[0]
    if e0.dim != d or et.dim != d or u.shape[0] != d:
        raise ContractError("dimension mismatch between rho, eigensystems and unitary")

    r = energy_basis_state(rho, e0)
    amp = transition_amplitudes(u, e0, et)
    pops = np.clip(r.diagonal().real, 0.0, None)
    e_in, e_fin = e0.values, et.values

    if scheme.kind == "projective":
        per_level = []
        for n in range(d):
            per_level.append(MixtureDistribution(
                np.abs(amp[:, n]) ** 2, e_fin - e_in[n], np.zeros(d), f"level:{n}"))
        incoherent = _population_sum(per_level, pops)
        coherent = MixtureDistribution.empty("coherent")
        damping = np.eye(d)
        full = (incoherent + coherent).relabel("full")
        factor = _survived_factor(r, damping)
        return WorkDecomposition(full, incoherent, coherent, per_level, factor,
                                 scheme, pops, r, damping)

    width = scheme.work_width
    gap = e_in[:, None] - e_in[None, :]
    damping = np.exp(-gap ** 2 / (8 * scheme.sigma ** 2))

    per_level = []
    for n in range(d):
        per_level.append(MixtureDistribution(
            np.abs(amp[:, n]) ** 2, e_fin - e_in[n], np.full(d, width), f"level:{n}"))
    incoherent = _population_sum(per_level, pops)

    cw, cm = [], []
    for n in range(d):
        for k in range(d):
            if k == n or r[n, k] == 0:
                continue
            # <m|U|n> rho_{nk} <k|U^dag|m>
            cw.append(r[n, k] * amp[:, n] * np.conj(amp[:, k]) * damping[n, k])
            cm.append(e_fin - 0.5 * (e_in[n] + e_in[k]))
    if cw:
        cw = np.concatenate(cw)
        coherent = MixtureDistribution(cw, np.concatenate(cm), np.full(len(cw), width), "coherent")
    else:
        coherent = MixtureDistribution.empty("coherent")
    full = (incoherent + coherent).relabel("full")
    factor = _survived_factor(r, damping)
    return WorkDecomposition(full, incoherent, coherent, per_level, factor,
                             scheme, pops, r, damping)


def _population_sum(per_level, pops):
    out = MixtureDistribution.empty("incoherent")
    for p, dist in zip(pops, per_level):
        out = out + dist.scaled(p)
    return out.relabel("incoherent")


def _survived_factor(r, damping):
    d = r.shape[0]
    off = ~np.eye(d, dtype=bool)
    if d == 1:
        return 1.0
    mag = np.abs(r)[off]
    if mag.sum() > 0:
        return float((mag * damping[off]).sum() / mag.sum())
    return float(damping[off].mean())
