import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qwork.duality import (BoundViolation, DualityReport, ResolutionError, check_report,
                           closed_form_effectiveness_2level, closed_form_predictability_2level,
                           coherence_l1, coherence_trace_norm, default_sigma_grid, duality_report,
                           effectiveness, evolved_basis_report, min_uncertainty_scan, predictability,
                           proof_chain_check, resolve_eps_convention, run_scan)
from qwork.experiment import TwoLevelExperiment, pure_state
from qwork.model import DrivenTwoLevel
from qwork.qcore import SIGMA_X, SIGMA_Z, ContractError, hermitian_eigensystem
from qwork.workdist import MeasurementScheme, build_work_distribution, trace_distance

PROJ = MeasurementScheme.projective()
G = MeasurementScheme.gaussian


def test_eigenstate_is_fully_predictable(fig1):
    for scheme in (PROJ, G(0.01), G(1.0), G(100.0)):
        dec = fig1.decomposition(0.0, scheme)
        assert predictability(dec) == pytest.approx(1.0, abs=1e-9)
        assert effectiveness(dec) == 0


@pytest.mark.parametrize("theta", [np.pi / 16, np.pi / 8, np.pi / 4])
def test_projective_limit(fig1, theta):
    dec = fig1.decomposition(theta, PROJ)
    assert predictability(dec) == pytest.approx(1.0, abs=1e-6)
    assert effectiveness(dec) == 0.0


def test_identical_per_level_distributions():
    # U = I with degenerate initial levels: both levels give the same distribution
    e = hermitian_eigensystem(np.zeros((2, 2)))
    et = hermitian_eigensystem(SIGMA_X)
    theta = 0.3
    dec = build_work_distribution(pure_state(theta), e, et, np.eye(2), G(0.4))
    assert predictability(dec) == pytest.approx(math.cos(2 * theta), abs=1e-9)


def test_disjoint_supports_saturate():
    # a full swap sends level 1 to W = +2 and level 2 to W = -2
    e0 = hermitian_eigensystem(SIGMA_Z)
    dec = build_work_distribution(np.eye(2) / 2, e0, e0, SIGMA_X, PROJ)
    assert predictability(dec) == 1.0


def test_population_guard(fig1):
    dec = fig1.decomposition(0.3, G(0.2))
    with pytest.raises(ContractError):
        predictability(dec, [0.5, 0.6])


def test_fig1_closed_form_predictability(fig1):
    for theta, sigma in [(np.pi / 8, 0.5), (np.pi / 16, 0.3), (np.pi / 4, 0.02)]:
        ref = predictability(fig1.decomposition(theta, G(sigma)), tol=1e-11)
        cf = closed_form_predictability_2level(theta, fig1.sched, fig1.t, sigma, unitary=fig1.unitary)
        assert cf == pytest.approx(ref, abs=1e-8)


def test_closed_form_predictability_limits(fig1):
    assert closed_form_predictability_2level(0.0, fig1.sched, fig1.t, 0.3, unitary=fig1.unitary) == \
        pytest.approx(1.0, abs=1e-9)
    theta = np.pi / 8
    flat = closed_form_predictability_2level(theta, fig1.sched, fig1.t, 100.0, unitary=fig1.unitary)
    assert flat == pytest.approx(math.cos(2 * theta), abs=1e-2)


def test_closed_form_effectiveness_limits(fig1):
    u = fig1.unitary
    assert closed_form_effectiveness_2level(np.pi / 4, fig1.sched, fig1.t, 1e-4, unitary=u) < 1e-9
    assert closed_form_effectiveness_2level(np.pi / 4, fig1.sched, fig1.t, 1e5, unitary=u) < 1e-4
    # omega0 = 0: the damping factor is exactly one, erf only
    s = DrivenTwoLevel(0.0, 0.01)
    exp = TwoLevelExperiment(0.0, 0.01, 100.0)
    dec = exp.decomposition(np.pi / 4, G(0.3))
    assert dec.survived_coherence_factor == 1.0
    assert effectiveness(dec) == pytest.approx(
        closed_form_effectiveness_2level(np.pi / 4, s, 100.0, 0.3, unitary=exp.unitary), abs=1e-9)


def test_eps_resolution(fig1):
    res = resolve_eps_convention(fig1, np.pi / 4, np.logspace(-2, 1, 8))
    assert res.winner == "eps2"
    assert res.max_deviation["eps2"] < 1e-9
    assert res.max_deviation["full_gap"] > 1e-6


def test_eps_resolution_reports_failure():
    # a non-two-level-shaped reference: theta outside the closed form's family cannot be rescued
    class Broken:
        sched = DrivenTwoLevel(0.01, 0.01)
        t = 100.0
        unitary = np.eye(2)

        def decomposition(self, theta, scheme):
            return TwoLevelExperiment().decomposition(theta, scheme)

    with pytest.raises(ResolutionError):
        resolve_eps_convention(Broken(), np.pi / 4, [0.1, 0.3])


def test_report_examples(fig1):
    rep = duality_report(fig1.decomposition(np.pi / 4, G(0.2)))
    assert rep.c == pytest.approx(1.0, abs=1e-12)
    assert rep.d_state == pytest.approx(0.0, abs=1e-12)
    assert rep.v_state == pytest.approx(1.0, abs=1e-12)
    assert rep.c_tilde == pytest.approx(math.exp(-0.01 ** 2 / (2 * 0.2 ** 2)), abs=1e-12)
    mixed = duality_report(build_work_distribution(np.eye(2) / 2, fig1.e0, fig1.et, fig1.unitary, G(0.2)))
    assert mixed.c == 0 and mixed.v_w == 0


def test_effectiveness_is_twice_trace_distance(fig1):
    dec = fig1.decomposition(np.pi / 4, G(0.2))
    assert effectiveness(dec) == pytest.approx(2 * trace_distance(dec.full, dec.incoherent), abs=1e-9)


def test_bound_violation_is_raised_not_clamped():
    rep = DualityReport(d_w=0.9, v_w=0.6, c=1.0, c_tilde=1.0, d_state=0.0, v_state=1.0,
                        bound_residual=1 - 0.81 - 0.36, sum_residual=0.0,
                        provenance={"dim": 2, "theta": 0.1})
    with pytest.raises(BoundViolation) as info:
        check_report(rep)
    assert info.value.provenance["theta"] == 0.1


def random_process(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    b = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    u, _ = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return hermitian_eigensystem(a + a.conj().T), hermitian_eigensystem(b + b.conj().T), u


def random_state(rng, d, rank):
    x = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(1, 4), st.floats(0.02, 5.0), st.integers(0, 2 ** 31))
def test_general_dimension_bounds(d, rank, sigma, seed):
    rng = np.random.default_rng(seed)
    e0, et, u = random_process(rng, d)
    rho = random_state(rng, d, min(rank, d))
    dec = build_work_distribution(rho, e0, et, u, G(sigma))
    rep = duality_report(dec)
    assert rep.d_w ** 2 + rep.v_w ** 2 <= 1 + 1e-9
    assert rep.v_w <= rep.c / (d - 1) + 1e-9
    assert rep.v_w == pytest.approx(2 * trace_distance(dec.full, dec.incoherent) / (d - 1), abs=1e-8)


def test_coherence_measures_coincide_for_pure_qubit():
    r = pure_state(0.4)
    assert coherence_l1(r) == pytest.approx(coherence_trace_norm(r), abs=1e-15)
    assert coherence_l1(r) == pytest.approx(abs(math.sin(0.8)), abs=1e-15)


def test_proof_chain_eigenstate(fig1):
    rep = proof_chain_check(fig1.decomposition(0.0, G(0.3)), refinements=0)
    assert all(b["u_k_abs"] == 0 for b in rep.bins)
    assert rep.d_w_discrete == pytest.approx(rep.sum_v, abs=1e-12)
    assert rep.d_w_discrete == pytest.approx(1.0, abs=1e-6)


def test_proof_chain_perfect_overlap():
    e = hermitian_eigensystem(np.zeros((2, 2)))
    et = hermitian_eigensystem(SIGMA_X)
    dec = build_work_distribution(np.eye(2) / 2, e, et, np.eye(2), G(0.4))
    rep = proof_chain_check(dec, refinements=0, delta_w=1e-2)
    occupied = [b for b in rep.bins if b["v_k"] > 1e-300]
    assert all(abs(b["u_k_abs"] - 1) < 1e-12 for b in occupied)
    assert rep.d_w_discrete == pytest.approx(0.0, abs=1e-6)


def test_proof_chain_fig1(fig1):
    dec = fig1.decomposition(np.pi / 8, G(0.5))
    rep = proof_chain_check(dec, delta_w=1e-3)
    assert rep.d_w_discrete == pytest.approx(predictability(dec), abs=1e-4)
    assert rep.sum_v <= 1 + 1e-9
    assert rep.chain_residual >= -1e-9
    assert all(b["v_k"] >= 0 and b["u_k_abs"] <= 1 + 1e-12 for b in rep.bins)
    assert rep.v_w_discrete <= rep.v_w_upper_discrete + 1e-9


def test_proof_chain_rejects_coarse_grid(fig1):
    dec = fig1.decomposition(np.pi / 8, G(0.5))
    with pytest.raises(ResolutionError):
        proof_chain_check(dec, support=(-1.0, 1.0), refinements=0)
    with pytest.raises(ContractError):
        proof_chain_check(fig1.decomposition(np.pi / 8, PROJ))


def test_evolved_basis_identity_matches_plain_report(fig1):
    rho = pure_state(np.pi / 5)
    e = hermitian_eigensystem(0.3 * SIGMA_Z)
    a = evolved_basis_report(rho, np.eye(2), e, G(0.4))
    dec = build_work_distribution(rho, e, e, np.eye(2), G(0.4))
    b = duality_report(dec)
    assert a.d_w == pytest.approx(b.d_w, abs=1e-9)
    assert a.v_w == pytest.approx(b.v_w, abs=1e-9)


def test_evolved_eigenstate_has_no_effectiveness(fig1):
    # choose rho so that U rho U^dag is the ground state of the final Hamiltonian
    g = fig1.et.vector(0)
    rho_t = np.outer(g, g.conj())
    rho = fig1.unitary.conj().T @ rho_t @ fig1.unitary
    rep = evolved_basis_report(rho, fig1.unitary, fig1.et, G(0.2), h0_eigen=fig1.e0)
    assert rep.v_w == pytest.approx(0.0, abs=1e-12)


def test_evolved_fig1_bound(fig1):
    rep = evolved_basis_report(pure_state(np.pi / 4), fig1.unitary, fig1.et, G(0.2), h0_eigen=fig1.e0)
    assert rep.bound_residual >= -1e-9


def test_scan_theta_zero_never_exceeds_one():
    table = min_uncertainty_scan(DrivenTwoLevel(0.01, 0.01), 100.0, [0.0], [1e-3, 0.1, 10.0])
    assert all(r.dw_plus_vw == r.d_w <= 1 + 1e-9 for r in table.rows)


def test_scan_order_independent_of_workers(fig1):
    thetas, sigmas = [np.pi / 8, np.pi / 4], [0.01, 0.1, 1.0]
    a = run_scan(fig1, thetas, sigmas, workers=1)
    b = run_scan(fig1, thetas, sigmas, workers=3)
    assert a == b
    assert [(r.theta, r.sigma) for r in a] == [(t, s) for t in thetas for s in sigmas]


def test_scan_rejects_empty_grid():
    with pytest.raises(ContractError):
        min_uncertainty_scan(DrivenTwoLevel(0.01, 0.01), 100.0, [], [0.1])


def test_default_sigma_grid():
    g = default_sigma_grid()
    assert len(g) == 60 and g[0] == pytest.approx(1e-3) and g[-1] == pytest.approx(1e2)
    assert np.all(np.diff(g) > 0)


def test_monotone_limits(fig1):
    theta = np.pi / 8
    lo = duality_report(fig1.decomposition(theta, G(1e-3)))
    hi = duality_report(fig1.decomposition(theta, G(1e2)))
    assert lo.d_w == pytest.approx(1.0, abs=1e-2)
    assert hi.d_w == pytest.approx(math.cos(2 * theta), abs=1e-2)
    assert lo.v_w < 1e-2 and hi.v_w < 1e-2
