import numpy as np
import pytest

from cgsmooth.algorithm import derive_params, feasible_c
from cgsmooth.game import (CongestionGame, CostFunction, social_cost, verify_alpha_equilibrium,
                           rosenthal_potential)
from cgsmooth.oracle import (TooLarge, bruteforce_lambda, enumerate_equilibria, exact_poa,
                             exact_stretch, optimum_social_cost, subset_stretch_violations)
from cgsmooth.smoothness import POTENTIAL, SOCIAL_COST, certificate_for_game, solve_lp_phi, solve_lp_sc

from conftest import all_profiles, constant_pair, linear_pair, small_games


def _five_halves_game():
    """Three players, resources h0..h2 and g0..g2 with f(x) = x."""
    lin = CostFunction.monomial(1)
    strategies = []
    for i in range(3):
        own = [i, 3 + i]
        other = [(i + 1) % 3, (i + 2) % 3, 3 + (i + 1) % 3]
        strategies.append([own, other])
    return CongestionGame.build([lin] * 6, strategies)


def test_linear_pair_equilibria():
    eqs = enumerate_equilibria(linear_pair(), 1.0)
    assert sorted(p.choices for p in eqs) == [(0, 1), (1, 0)]


def test_huge_alpha_gives_all_profiles():
    g = linear_pair()
    assert len(enumerate_equilibria(g, 1e9)) == g.n_profiles == 4


def test_constant_game():
    g = constant_pair()
    assert len(enumerate_equilibria(g, 1.0)) == 4
    assert exact_poa(g) == 1
    assert exact_stretch(g, 1.0) == 1


def test_linear_pair_stretch_and_poa():
    g = linear_pair()
    assert exact_stretch(g, 1.0) == 1
    assert exact_poa(g) == 1
    assert optimum_social_cost(g)[0] == 2


def test_enumerate_matches_verify():
    for g in small_games(25, seed=5):
        for alpha in (1.0, 1.3):
            got = {p.choices for p in enumerate_equilibria(g, alpha)}
            want = {p.choices for p in all_profiles(g) if verify_alpha_equilibrium(g, p, alpha).holds}
            assert got == want


def test_enumerate_under_modified_costs_matches_verify():
    for g in small_games(10, seed=6, max_players=3):
        cert = certificate_for_game(g)
        got = {p.choices for p in enumerate_equilibria(g, 1.0, cert)}
        want = {p.choices for p in all_profiles(g)
                if verify_alpha_equilibrium(g, p, 1.0, cert).holds}
        assert got == want


def _hand_poa(g, fprime=None):
    profiles = list(all_profiles(g))
    opt = min(social_cost(g, p) for p in profiles)
    worst = max(social_cost(g, p) for p in profiles
                if verify_alpha_equilibrium(g, p, 1.0, fprime).holds)
    return worst / opt


def test_five_halves_poa():
    g = _five_halves_game()
    assert exact_poa(g) == pytest.approx(2.5)
    assert _hand_poa(g) == pytest.approx(2.5)


def test_poa_matches_hand_enumeration():
    for g in small_games(20, seed=9):
        assert exact_poa(g) == pytest.approx(_hand_poa(g))


def test_stretch_matches_hand_enumeration():
    for g in small_games(10, seed=10):
        profiles = list(all_profiles(g))
        best = min(rosenthal_potential(g, p) for p in profiles)
        worst = max(rosenthal_potential(g, p) for p in profiles
                    if verify_alpha_equilibrium(g, p, 1.2).holds)
        assert exact_stretch(g, 1.2) == pytest.approx(worst / best)


def test_stretch_bounded_by_theta():
    for g in small_games(10, seed=13, max_players=3):
        if g.n_players < 2:  # N^-c = 1 for every c
            continue
        cert = certificate_for_game(g)
        prm = derive_params(cert.lam, 0.5, g.n_players, c_override=feasible_c(cert.lam, 0.5, g.n_players))
        assert exact_stretch(g, prm.q, eq_fprime=cert) <= prm.theta_q * (1 + 1e-9)
        checked, bad = subset_stretch_violations(g, cert, prm.q, prm.theta_q)
        assert checked > 0 and bad == []


def test_too_large():
    g = CongestionGame.build([CostFunction.monomial(1)] * 2, [[[0], [1]]] * 24)
    for call in (lambda: enumerate_equilibria(g), lambda: exact_poa(g),
                 lambda: exact_stretch(g), lambda: optimum_social_cost(g)):
        with pytest.raises(TooLarge):
            call()
    with pytest.raises(TooLarge):
        bruteforce_lambda(CostFunction.monomial(1), 5, POTENTIAL)


def test_bruteforce_constant():
    res = bruteforce_lambda(CostFunction.constant(2.0), 2, SOCIAL_COST)
    assert res.lam == pytest.approx(1.0)


@pytest.mark.parametrize("family", [POTENTIAL, SOCIAL_COST])
def test_bruteforce_brackets_lp(family):
    f = CostFunction.monomial(1)
    lp = solve_lp_phi(f, 2)[0] if family == POTENTIAL else solve_lp_sc(f, 2)[0]
    res = bruteforce_lambda(f, 2, family)
    assert lp - 1e-9 <= res.lam <= lp + res.step + 1e-9
