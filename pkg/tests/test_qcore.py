import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from qwork.qcore import (SIGMA_X, SIGMA_Z, ContractError, expm_batch, expm_hermitian_times_minus_i,
                         frobenius_distance, hermitian_eigensystem, is_density, is_hermitian, is_unitary)
from qwork.model import DrivenTwoLevel


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (a + a.conj().T)


def test_sigma_z_eigensystem():
    es = hermitian_eigensystem(SIGMA_Z)
    np.testing.assert_allclose(es.values, [-1, 1])
    np.testing.assert_allclose(es.vectors, np.eye(2), atol=1e-15)


def test_sigma_x_eigensystem():
    es = hermitian_eigensystem(SIGMA_X)
    np.testing.assert_allclose(es.values, [-1, 1], atol=1e-15)
    r = 1 / np.sqrt(2)
    np.testing.assert_allclose(es.vector(0), [r, -r], atol=1e-15)
    np.testing.assert_allclose(es.vector(1), [r, r], atol=1e-15)


def test_fig1_final_hamiltonian_eigenvalues():
    # closed form evaluated independently of any eigensolver
    eps = np.sqrt(0.01 ** 2 + np.sin(1.0) ** 2)
    h = DrivenTwoLevel(0.01, 0.01).at(100.0)
    np.testing.assert_allclose(hermitian_eigensystem(h).values, [-eps, eps], rtol=0, atol=1e-14)


def test_non_hermitian_rejected_with_norm():
    with pytest.raises(ContractError, match="A - A\\^dag"):
        hermitian_eigensystem(np.array([[0, 1], [0, 0]], dtype=complex))


@pytest.mark.parametrize("d", [1, 2, 3, 5, 8, 16])
def test_eigensystem_invariants(d):
    rng = np.random.default_rng(d)
    h = random_hermitian(rng, d)
    es = hermitian_eigensystem(h)
    assert np.all(np.diff(es.values) >= 0)
    np.testing.assert_allclose(es.vectors.conj().T @ es.vectors, np.eye(d), atol=1e-12)
    assert frobenius_distance(es.reconstruct(), h) < 1e-10
    for n in range(d):
        v = es.vector(n)
        k = np.argmax(np.round(np.abs(v), 12))
        assert v[k].imag == 0 and v[k].real > 0


def test_eigensystem_deterministic():
    rng = np.random.default_rng(7)
    h = random_hermitian(rng, 6)
    a, b = hermitian_eigensystem(h), hermitian_eigensystem(h.copy())
    assert a.values.tobytes() == b.values.tobytes()
    assert a.vectors.tobytes() == b.vectors.tobytes()


def test_degenerate_block_is_basis_independent():
    # same degenerate subspace presented through two different unitary frames
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    h = q @ np.diag([0.0, 1.0, 1.0, 2.0]) @ q.conj().T
    es = hermitian_eigensystem(h)
    assert frobenius_distance(es.reconstruct(), h) < 1e-10
    np.testing.assert_allclose(es.vectors.conj().T @ es.vectors, np.eye(4), atol=1e-12)
    zero = hermitian_eigensystem(np.zeros((3, 3)))
    np.testing.assert_allclose(zero.vectors, np.eye(3))


def test_expm_zero_time_and_pi():
    np.testing.assert_allclose(expm_hermitian_times_minus_i(SIGMA_Z, 0.0), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(expm_hermitian_times_minus_i(SIGMA_X, np.pi), -np.eye(2), atol=1e-15)


def test_expm_matches_scaling_and_squaring_oracle():
    h = DrivenTwoLevel(0.01, 0.01).at(0.5)
    ref = scipy.linalg.expm(-1j * h * 0.01)
    for method in ("eig", "rodrigues", "auto"):
        u = expm_hermitian_times_minus_i(h, 0.01, method)
        assert frobenius_distance(u, ref) < 1e-12
        assert is_unitary(u, 1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-5, 5))
def test_expm_paths_agree_and_invert(seed, dt):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, 2)
    a = expm_hermitian_times_minus_i(h, dt, "eig")
    b = expm_hermitian_times_minus_i(h, dt, "rodrigues")
    assert frobenius_distance(a, b) < 1e-12
    assert frobenius_distance(a @ expm_hermitian_times_minus_i(h, -dt), np.eye(2)) < 1e-12
    stack = np.stack([h, 2 * h])
    np.testing.assert_allclose(expm_batch(stack, dt)[1], expm_hermitian_times_minus_i(2 * h, dt),
                               atol=1e-12)


def test_expm_batch_general_dim():
    rng = np.random.default_rng(11)
    hs = np.stack([random_hermitian(rng, 4) for _ in range(3)])
    out = expm_batch(hs, 0.3)
    for h, u in zip(hs, out):
        assert frobenius_distance(u, scipy.linalg.expm(-0.3j * h)) < 1e-12


def test_frobenius_distance():
    assert frobenius_distance(np.eye(2), np.eye(2)) == 0
    assert frobenius_distance(SIGMA_Z, -SIGMA_Z) == pytest.approx(2 * np.sqrt(2), abs=1e-15)
    with pytest.raises(ContractError):
        frobenius_distance(np.eye(2), np.eye(3))


def test_predicates():
    assert is_hermitian(SIGMA_X)
    assert not is_hermitian(np.array([[0, 1j], [1j, 0]]))
    assert is_density(np.eye(2) / 2)
    assert not is_density(np.diag([1.5, -0.5]).astype(complex))
    assert not is_density(np.eye(2))
    assert is_unitary(SIGMA_X)
    assert not is_unitary(2 * np.eye(2))
    with pytest.raises(ContractError):
        expm_hermitian_times_minus_i(np.eye(3), 1.0, "rodrigues")
