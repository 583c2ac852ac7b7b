import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgsmooth.game import CongestionGame, CostFunction, LoadOutOfRange
from cgsmooth.lp import solve
from cgsmooth.oracle import bruteforce_lambda
from cgsmooth.smoothness import (POTENTIAL, SOCIAL_COST, ObjectiveFamily, SmoothnessCertificate,
                                 SmoothnessError, TruncatedLP, build_lp_phi, build_lp_sc,
                                 certificate_for_game, certificate_from_fprime,
                                 eval_phi_constraint, eval_sc_constraint, fit_certificate,
                                 monomial_certificate, rescale_mu, solve_lp_phi, solve_lp_sc,
                                 solve_lp_sc_lazy, tail_nu, verify_certificate, verify_tail_lemma)

LIN = CostFunction.monomial(1)
ONE = CostFunction.constant(1)


# --- objective families ---------------------------------------------------------------------

def test_objective_h():
    sq = CostFunction.monomial(1)
    assert list(ObjectiveFamily(SOCIAL_COST).h(sq, 3)) == [0, 1, 4, 9]
    assert list(ObjectiveFamily(POTENTIAL).h(sq, 3)) == [0, 1, 3, 6]
    assert list(ObjectiveFamily(POTENTIAL).h(sq, 2, z=2)) == [0, 3, 7]
    assert ObjectiveFamily(POTENTIAL).scope == "strong"
    with pytest.raises(SmoothnessError):
        ObjectiveFamily("makespan")


# --- constraint evaluation ------------------------------------------------------------------

def test_eval_sc_examples():
    k = np.arange(0, 5, dtype=float)
    h, fp = k ** 2, 1.5 * k
    assert eval_sc_constraint(h, fp, 1, 1, 2.5) == pytest.approx(0.0)
    assert eval_sc_constraint(h, fp, 0, 0, 7.0) == 0.0
    n, m = np.meshgrid(np.arange(4), np.arange(5), indexing="ij")
    assert np.all(eval_sc_constraint(k, np.ones(5), n, m, 1.0) == 0)
    with pytest.raises(LoadOutOfRange):
        eval_sc_constraint(h, fp, 4, 1, 2.5)


def test_eval_phi_examples():
    rng = np.random.default_rng(0)
    f = np.concatenate([[0.0], np.sort(rng.uniform(1, 5, 8))])
    fp = f * rng.uniform(1, 2, 9)
    lam = 1.7
    for i in range(1, 8):
        assert eval_phi_constraint(f, fp, 0, i - 1, 1, lam) == pytest.approx(lam * f[i] - fp[i])
        assert eval_phi_constraint(f, fp, 1, i - 1, 0, lam) == pytest.approx(fp[i] - f[i])
    ones = np.ones(9)
    n, z, m = np.meshgrid(np.arange(3), np.arange(3), np.arange(3), indexing="ij")
    assert np.all(eval_phi_constraint(ones, ones, n, z, m, 1.0) == 0)
    with pytest.raises(LoadOutOfRange):
        eval_phi_constraint(f, fp, 8, 0, 0, lam)


# --- finite LPs -----------------------------------------------------------------------------

def test_constant_costs_give_one():
    lam, fp = solve_lp_phi(ONE, 6)
    assert lam == pytest.approx(1.0)
    lam, fp = solve_lp_sc(ONE, 6)
    assert lam == pytest.approx(1.0)
    cert = SmoothnessCertificate((np.array([0.0] + [1.0] * 8),), 1.0, POTENTIAL, "strong", (ONE,))
    assert verify_certificate(cert, exhaustive=True, m_max=30).valid


@pytest.mark.parametrize("family,solver", [(POTENTIAL, solve_lp_phi), (SOCIAL_COST, solve_lp_sc)])
def test_finite_lp_matches_simplex_and_grid(family, solver):
    for f in (LIN, CostFunction.monomial(2)):
        lam, _ = solver(f, 2)
        lam_s, _ = solver(f, 2, backend="simplex")
        assert lam == pytest.approx(lam_s, rel=1e-8)
        grid = bruteforce_lambda(f, 2, family)
        assert lam - 1e-9 <= grid.lam <= lam + grid.step * 20 + 1e-9


# frozen values of the finite programs for f(x) = x (cross-checked with the Bland simplex)
PHI_LIN = {5: 1.6111111, 10: 1.6111111, 20: 1.6111111, 40: 1.6111111}
SC_LIN = {5: 1.9846154, 10: 2.0117716, 20: 2.0120669, 40: 2.0120669}


def test_finite_lp_frozen_values_and_monotone():
    prev_phi = prev_sc = 0.0
    for N in (5, 10, 20, 40):
        phi = solve_lp_phi(LIN, N)[0]
        sc = solve_lp_sc(LIN, N)[0]
        assert phi == pytest.approx(PHI_LIN[N], rel=1e-6)
        assert sc == pytest.approx(SC_LIN[N], rel=1e-6)
        assert phi >= prev_phi - 1e-9 and sc >= prev_sc - 1e-9
        prev_phi, prev_sc = phi, sc
    assert solve_lp_phi(LIN, 5, backend="simplex")[0] == pytest.approx(PHI_LIN[5], rel=1e-7)
    assert solve_lp_sc(LIN, 5, backend="simplex")[0] == pytest.approx(SC_LIN[5], rel=1e-7)


def test_sc_linear_n50_window():
    lam = solve_lp_sc(LIN, 50)[0]
    assert 1.9 <= lam <= 2.0120670


def test_lazy_finite_sc_matches_eager():
    for f in (LIN, CostFunction.monomial(3), CostFunction.polynomial([1, 2, 1])):
        eager = solve_lp_sc(f, 40)[0]
        lazy = solve_lp_sc_lazy(f, 40)
        assert lazy.lam == pytest.approx(eager, rel=1e-6)
        assert len(lazy.active) < 41 * 41


def test_pinned_sc_certificate_binding_rows():
    k = np.arange(0, 2002, dtype=float)
    cert = SmoothnessCertificate((1.5 * k,), 2.5, SOCIAL_COST, "plain", (LIN,))
    res = verify_certificate(cert, exhaustive=True, n_max=2000, m_max=2000)
    assert res.valid and res.worst_slack == pytest.approx(0.0, abs=1e-9)
    h = k ** 2
    assert eval_sc_constraint(h, 1.5 * k, 1, 1, 2.5) == pytest.approx(0.0)
    assert eval_sc_constraint(h, 1.5 * k, 2, 1, 2.5) == pytest.approx(0.0)


# --- truncated LPs and certificates ---------------------------------------------------------

TABLE1 = {1: (1.61, 0.01), 2: (3.35, 0.02), 3: (8.60, 0.05)}
TABLE2 = {1: (2.012, 0.005), 2: (5.10, 0.03)}


@pytest.mark.parametrize("d", [1, 2, 3])
def test_potential_certificates(d):
    cert = monomial_certificate(d, POTENTIAL)
    target, tol = TABLE1[d]
    assert abs(cert.lam - target) <= tol
    assert cert.scope == "strong" and cert.K == 150
    assert cert.sandwich_violation() <= 1e-9
    ext = cert.extended(2 * cert.K)
    assert verify_certificate(ext, n_max=2 * cert.K - 1).valid
    assert verify_tail_lemma(d, cert.lam, POTENTIAL) <= 150


@pytest.mark.parametrize("d", [1, 2])
def test_social_certificates(d):
    cert = monomial_certificate(d, SOCIAL_COST)
    target, tol = TABLE2[d]
    assert abs(cert.lam - target) <= tol
    assert cert.scope == "plain" and cert.K == 1154
    assert verify_certificate(cert.extended(2400), n_max=2300).valid
    assert verify_tail_lemma(d, cert.lam, SOCIAL_COST) <= 1154


def test_reduced_lambda_is_invalid():
    cert = monomial_certificate(1, POTENTIAL)
    weaker = SmoothnessCertificate(cert.fprime, cert.lam * 0.99, POTENTIAL, "strong", cert.costs)
    res = verify_certificate(weaker)
    assert not res.valid and res.witness is not None
    lam, fp = solve_lp_sc(LIN, 12)
    weaker = SmoothnessCertificate((fp,), lam * 0.99, SOCIAL_COST, "plain", (LIN,))
    res = verify_certificate(weaker, m_max=12)
    assert not res.valid and len(res.witness) == 2


def test_truncated_oracle_soundness_small_k():
    """Cuts are violated when returned and a clean verdict survives a full scan."""
    for family in (POTENTIAL, SOCIAL_COST):
        prob = TruncatedLP(2, family, 12)
        lam_hat = 3.4 if family == POTENTIAL else 5.2
        nu = tail_nu(lam_hat, 2, family)
        prob.lp.lower[11] = prob.lp.upper[11] = nu
        for _ in range(100):
            res = solve(prob.lp)
            cuts = prob.oracle(res.x)
            if cuts is None:
                break
            assert np.all(cuts.rows @ res.x - cuts.rhs < 0)
            prob.lp.add_rows(cuts.rows, cuts.relation, cuts.rhs)
        else:
            pytest.fail("oracle did not converge")
        lam, fp = prob.decode(res.x)
        n = np.arange(prob.n_blk.size)
        keys = np.array([(a, b, m) for a, b in zip(prob.n_blk, prob.z_blk)
                         for m in range(prob.m_max + 1)])
        A, b = prob.rows(keys)
        assert np.min(A @ res.x - b) >= -1e-8


def test_tail_lemma():
    assert verify_tail_lemma(1, 1.61, POTENTIAL) <= 150
    assert verify_tail_lemma(1, 2.012, SOCIAL_COST) <= 1154
    assert verify_tail_lemma(1, 1e6, SOCIAL_COST) == 1
    with pytest.raises(SmoothnessError):
        verify_tail_lemma(1, 1.0001, POTENTIAL, scan=1000)
    with pytest.raises(SmoothnessError):
        verify_tail_lemma(7, 2.0, POTENTIAL)


def test_degree_range():
    with pytest.raises(SmoothnessError):
        TruncatedLP(0, POTENTIAL, 10)
    with pytest.raises(SmoothnessError):
        TruncatedLP(6, SOCIAL_COST, 10)


# --- game certificates ----------------------------------------------------------------------

def test_certificate_for_polynomial_game():
    poly = CostFunction.polynomial([2, 1, 0.5])
    g = CongestionGame.build([poly, LIN], [[[0], [1]], [[0, 1]], [[1]]])
    cert = certificate_for_game(g, POTENTIAL)
    assert cert.lam == pytest.approx(monomial_certificate(2, POTENTIAL).lam)
    assert cert.sandwich_violation() <= 1e-9
    assert verify_certificate(cert, exhaustive=True, m_max=40).valid


def test_certificate_for_table_game():
    t = CostFunction.table([1, 1, 3, 3])
    g = CongestionGame.build([t, t], [[[0], [1]]] * 4)
    for family in (POTENTIAL, SOCIAL_COST):
        cert = certificate_for_game(g, family)
        assert verify_certificate(cert, exhaustive=True).valid
        if family == POTENTIAL:
            assert cert.sandwich_violation() <= 1e-9


def test_fit_certificate():
    mono = monomial_certificate(1, POTENTIAL)
    g = CongestionGame.build([CostFunction.monomial(1, 3.0), CostFunction.polynomial([2, 1])],
                             [[[0], [1]]] * 3)
    fitted = fit_certificate(mono, g)
    assert fitted.fprime[0][2] == pytest.approx(3 * mono.fprime[0][2])
    assert fitted.fprime[1][2] == pytest.approx(2 + mono.fprime[0][2])
    bad = CongestionGame.build([CostFunction.monomial(2)], [[[0]]])
    with pytest.raises(SmoothnessError):
        fit_certificate(mono, bad)


def test_certificate_from_fprime_recovers_lambda():
    k = np.arange(0, 42, dtype=float)
    cert = certificate_from_fprime([LIN], [1.5 * k], SOCIAL_COST)
    assert cert.lam == pytest.approx(2.5, rel=1e-7)


def test_rescale_mu():
    lam, fp = rescale_mu(1.5, 0.25, [0, 1, 2])
    assert lam == 2.0 and list(fp) == pytest.approx([0, 4 / 3, 8 / 3])
    with pytest.raises(SmoothnessError):
        rescale_mu(1.5, 1.0, [0, 1])


# --- JSON -----------------------------------------------------------------------------------

def test_certificate_json_round_trip():
    cert = monomial_certificate(2, POTENTIAL)
    data = cert.to_json()
    assert set(data) >= {"lambda", "objective", "scope", "fprime", "nu", "K"}
    assert len(data["fprime"][0]) == cert.K
    again = SmoothnessCertificate.from_json(data)
    assert again.to_json() == data
    assert all(np.array_equal(a, b) for a, b in zip(again.fprime, cert.fprime))
    with pytest.raises(SmoothnessError):
        SmoothnessCertificate.from_json({"lambda": 2, "objective": "potential", "scope": "wide",
                                         "fprime": [[1]], "degree": 1})


@settings(max_examples=25, deadline=None)
@given(vals=st.lists(st.floats(0.5, 4.0), min_size=2, max_size=5))
def test_random_table_certificates_verify(vals):
    f = CostFunction.table(np.cumsum(vals))
    N = len(vals)
    lam, fp = solve_lp_sc(f, N, monotone_top=True)
    cert = SmoothnessCertificate((fp,), lam, SOCIAL_COST, "plain", (f,))
    assert verify_certificate(cert, exhaustive=True).valid
    assert fp[N + 1] >= fp[N] - 1e-9
    lam, fp = solve_lp_phi(f, N, load_cap=N, monotone_top=True)
    cert = SmoothnessCertificate((fp,), lam, POTENTIAL, "strong", (f,))
    assert verify_certificate(cert, exhaustive=True).valid
    assert cert.sandwich_violation() <= 1e-9
    assert lam >= 1 - 1e-9


def test_free_top_entry_is_what_monotone_top_fixes():
    lam_free, fp = solve_lp_sc(LIN, 5)
    lam_tied, fp_tied = solve_lp_sc(LIN, 5, monotone_top=True)
    assert fp[6] < fp[5] and fp_tied[6] >= fp_tied[5] - 1e-9
    assert lam_free <= lam_tied
