"""Small dense complex linear algebra.

Operators are plain ``numpy`` arrays of shape ``(d, d)`` with complex dtype.
Everything here is a pure function of its inputs.
"""
from dataclasses import dataclass

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
# basis order is (|1>, |2>) with sigma_z = |2><2| - |1><1|
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)


@dataclass(frozen=True)
class Tolerances:
    hermiticity: float = 1e-10
    unitarity: float = 1e-9
    density: float = 1e-10
    degeneracy: float = 1e-10


TOL = Tolerances()


class ContractError(ValueError):
    """An input violates an operation's precondition."""


def as_operator(a):
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ContractError(f"operator must be a non-empty square matrix, got shape {a.shape}")
    return a


def dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def hermiticity_residual(a):
    a = as_operator(a)
    return float(np.linalg.norm(a - dagger(a)))


def is_hermitian(a, tol=TOL.hermiticity):
    return hermiticity_residual(a) <= tol


def unitarity_residual(u):
    u = as_operator(u)
    return float(np.linalg.norm(dagger(u) @ u - np.eye(u.shape[0])))


def is_unitary(u, tol=TOL.unitarity):
    return unitarity_residual(u) <= tol


def is_density(rho, tol=TOL.density):
    rho = as_operator(rho)
    if not is_hermitian(rho, tol):
        return False
    if abs(np.trace(rho) - 1) > tol:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (rho + dagger(rho))).min() >= -tol)


def frobenius_distance(a, b):
    a, b = as_operator(a), as_operator(b)
    if a.shape != b.shape:
        raise ContractError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def require_hermitian(a, tol=TOL.hermiticity):
    a = as_operator(a)
    r = hermiticity_residual(a)
    if r > tol:
        raise ContractError(f"operator is not Hermitian: ||A - A^dag||_F = {r:.3e} > {tol:.1e}")
    return a


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Ascending real eigenvalues and matching orthonormal eigenvectors.

    ``vectors[:, n]`` is the eigenvector for ``values[n]``. Each vector has
    its largest-modulus entry real and positive.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self):
        return len(self.values)

    def vector(self, n):
        return self.vectors[:, n]

    def reconstruct(self):
        return (self.vectors * self.values) @ dagger(self.vectors)

    def projector(self, n):
        v = self.vectors[:, n]
        return np.outer(v, v.conj())


def fix_phase(v):
    """Rotate ``v`` so that its first largest-modulus entry is real positive."""
    k = int(np.argmax(np.round(np.abs(v), 12)))
    out = v * (abs(v[k]) / v[k])
    out[k] = abs(v[k])
    return out


def _canonical_block_basis(vecs):
    # Gram-Schmidt of the block projector applied to e_1, e_2, ...; depends
    # only on the subspace, not on the solver's arbitrary rotation inside it.
    d, k = vecs.shape
    proj = vecs @ dagger(vecs)
    basis = []
    for j in range(d):
        w = proj[:, j].copy()
        for b in basis:
            w -= b * np.vdot(b, w)
        nrm = np.linalg.norm(w)
        if nrm > 1e-6:
            basis.append(w / nrm)
            if len(basis) == k:
                break
    return np.column_stack(basis)


def hermitian_eigensystem(op, tol=TOL.hermiticity):
    op = require_hermitian(op, tol)
    h = 0.5 * (op + dagger(op))
    values, vectors = np.linalg.eigh(h)
    scale = max(1.0, float(np.abs(values).max()))
    out = vectors.copy()
    start = 0
    d = len(values)
    while start < d:
        stop = start + 1
        while stop < d and values[stop] - values[start] <= TOL.degeneracy * scale:
            stop += 1
        if stop - start > 1:
            out[:, start:stop] = _canonical_block_basis(vectors[:, start:stop])
        start = stop
    for n in range(d):
        out[:, n] = fix_phase(out[:, n])
    return EigenSystem(values=values.astype(float), vectors=out)


def _expm2_rodrigues(op, dt):
    # op = a I + bx X + by Y + bz Z, with Z = diag(1, -1) in the usual Pauli sense
    a = 0.5 * (op[0, 0] + op[1, 1]).real
    bz = 0.5 * (op[0, 0] - op[1, 1]).real
    bx = op[0, 1].real
    by = -op[0, 1].imag
    b = np.sqrt(bx * bx + by * by + bz * bz)
    c, s = np.cos(b * dt), np.sinc(b * dt / np.pi) * dt
    nsig = np.array([[bz, bx - 1j * by], [bx + 1j * by, -bz]])
    return np.exp(-1j * a * dt) * (c * np.eye(2) - 1j * s * nsig)


def expm_hermitian_times_minus_i(op, dt, method="auto"):
    """Return ``exp(-i op dt)`` for Hermitian ``op``.

    ``method`` is ``"eig"``, ``"rodrigues"`` (d=2 only) or ``"auto"``.
    """
    op = require_hermitian(op)
    op = 0.5 * (op + dagger(op))
    if method == "auto":
        method = "rodrigues" if op.shape[0] == 2 else "eig"
    if method == "rodrigues":
        if op.shape[0] != 2:
            raise ContractError("closed-form exponential only exists for d=2")
        return _expm2_rodrigues(op, dt)
    values, vectors = np.linalg.eigh(op)
    return (vectors * np.exp(-1j * values * dt)) @ dagger(vectors)


def expm2_batch(hs, dt):
    """Vectorised ``exp(-i H dt)`` for a stack ``hs`` of 2x2 Hermitian matrices."""
    a = 0.5 * (hs[:, 0, 0] + hs[:, 1, 1]).real
    bz = 0.5 * (hs[:, 0, 0] - hs[:, 1, 1]).real
    bx = hs[:, 0, 1].real
    by = -hs[:, 0, 1].imag
    b = np.sqrt(bx * bx + by * by + bz * bz)
    c = np.cos(b * dt)
    s = np.sinc(b * dt / np.pi) * dt
    ph = np.exp(-1j * a * dt)
    out = np.empty(hs.shape, dtype=complex)
    out[:, 0, 0] = ph * (c - 1j * s * bz)
    out[:, 1, 1] = ph * (c + 1j * s * bz)
    out[:, 0, 1] = ph * (-1j * s * (bx - 1j * by))
    out[:, 1, 0] = ph * (-1j * s * (bx + 1j * by))
    return out


def expm_batch(hs, dt):
    """Vectorised ``exp(-i H dt)`` for a stack of Hermitian matrices of any size."""
    if hs.shape[-1] == 2:
        return expm2_batch(hs, dt)
    values, vectors = np.linalg.eigh(hs)
    return (vectors * np.exp(-1j * values * dt)[:, None, :]) @ dagger(vectors)
