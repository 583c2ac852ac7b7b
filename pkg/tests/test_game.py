import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgsmooth.game import (CongestionGame, CostFunction, GameError, LoadOutOfRange, PlayerSubset,
                           StrategyProfile, best_response, deviation_cost, optimistic_cost,
                           player_cost, rosenthal_potential, social_cost, subgame_potential,
                           verify_alpha_equilibrium)
from cgsmooth.random_games import random_game

from conftest import all_profiles, small_games


def _brute_cost(game, choices, u, f=None):
    loads = np.zeros(game.n_resources, dtype=int)
    for v, k in enumerate(choices):
        for e in game.strategies[v][k]:
            loads[e] += 1
    return sum(game.resources[e](loads[e]) if f is None else f[e][loads[e]]
               for e in game.strategies[u][choices[u]])


# --- cost functions ------------------------------------------------------------------------

def test_cost_function_validation():
    with pytest.raises(GameError):
        CostFunction.table([2, 1])
    with pytest.raises(GameError):
        CostFunction.table([-1, 1])
    with pytest.raises(GameError):
        CostFunction.polynomial([1, -1])
    with pytest.raises(GameError):
        CostFunction("cubic")
    assert CostFunction.polynomial([1, 0, 2])(3) == 19
    assert CostFunction.monomial(2).degree == 2
    assert CostFunction.table([1, 2, 4]).n_max == 3


def test_table_range():
    f = CostFunction.table([1, 2])
    assert f(2) == 2
    with pytest.raises(LoadOutOfRange):
        f(3)


def test_game_invariants():
    lin = CostFunction.monomial(1)
    with pytest.raises(GameError):
        CongestionGame.build([lin], [[[]]])
    with pytest.raises(GameError):
        CongestionGame.build([lin], [[]])
    with pytest.raises(GameError):
        CongestionGame.build([lin], [[[1]]])
    with pytest.raises(GameError):
        CongestionGame.build([CostFunction.table([1])], [[[0]], [[0]]])


def test_game_json_round_trip():
    g = random_game(4, 5, 2, seed=3)
    g2 = CongestionGame.from_json(g.to_json())
    assert g2 == g
    t = CongestionGame.build([CostFunction.table([1, 2, 3])], [[[0]], [[0]]])
    assert CongestionGame.from_json(t.to_json()) == t
    assert t.to_json()["resources"][0] == {"kind": "table", "values": [1.0, 2.0, 3.0]}


def test_profile_json_and_loads(pair):
    p = StrategyProfile.from_choices(pair, [0, 0])
    assert p.loads == (2, 0)
    assert StrategyProfile.from_json(pair, p.to_json()) == p
    with pytest.raises(GameError):
        StrategyProfile.from_choices(pair, [0, 2])


# --- player_cost / deviation_cost -----------------------------------------------------------

def test_player_cost_examples(pair):
    p = StrategyProfile.from_choices(pair, [0, 0])
    assert player_cost(pair, p, 0) == 2 and player_cost(pair, p, 1) == 2
    sq = CongestionGame.build([CostFunction.monomial(2)], [[[0]]])
    assert player_cost(sq, StrategyProfile.from_choices(sq, [0]), 0) == 1


def test_player_cost_out_of_range():
    g = CongestionGame.build([CostFunction.table([1, 1])], [[[0]], [[0]]])
    p = StrategyProfile.from_choices(g, [0, 0])
    with pytest.raises(LoadOutOfRange):
        player_cost(g, p, 0, fprime=[np.array([0.0, 1.0])])


def test_player_cost_random_matches_brute_force():
    for g in small_games(30, seed=1, max_players=3):
        for p in all_profiles(g):
            for u in range(g.n_players):
                assert math.isclose(player_cost(g, p, u), _brute_cost(g, p.choices, u))


def test_deviation_cost_examples(pair):
    p = StrategyProfile.from_choices(pair, [0, 0])
    assert deviation_cost(pair, p, 0, 1) == 1
    assert deviation_cost(pair, p, 0, 0) == player_cost(pair, p, 0)
    assert p.choices == (0, 0)
    with pytest.raises(GameError):
        deviation_cost(pair, p, 0, 5)


def test_deviation_cost_equals_modified_profile():
    for g in small_games(30, seed=2):
        for p in all_profiles(g):
            for u in range(g.n_players):
                for k in range(len(g.strategies[u])):
                    q = StrategyProfile.from_choices(g, p.choices[:u] + (k,) + p.choices[u + 1:])
                    assert math.isclose(deviation_cost(g, p, u, k), player_cost(g, q, u))


# --- potentials -----------------------------------------------------------------------------

def test_potential_examples(pair):
    assert rosenthal_potential(pair, StrategyProfile.from_choices(pair, [0, 0])) == 3
    empty = CongestionGame.build([CostFunction.monomial(1)], [])
    assert rosenthal_potential(empty, StrategyProfile.from_choices(empty, [])) == 0


def test_exact_potential_property():
    for g in small_games(40, seed=4):
        for p in all_profiles(g):
            phi = rosenthal_potential(g, p)
            for u in range(g.n_players):
                for k in range(len(g.strategies[u])):
                    q = p.with_choice(g, u, k)
                    d_phi = rosenthal_potential(g, q) - phi
                    d_c = player_cost(g, q, u) - player_cost(g, p, u)
                    assert math.isclose(d_phi, d_c, rel_tol=1e-9, abs_tol=1e-9)


def test_potential_sandwich():
    for g in small_games(40, seed=5):
        for p in all_profiles(g):
            phi = rosenthal_potential(g, p)
            lower = sum(g.resources[e](k) for e, k in enumerate(p.loads) if k)
            upper = sum(player_cost(g, p, u) for u in range(g.n_players))
            assert lower <= phi * (1 + 1e-12) and phi <= upper * (1 + 1e-12)
            assert math.isclose(upper, social_cost(g, p))


def test_subgame_potential():
    rng = np.random.default_rng(6)
    for g in small_games(40, seed=6):
        N = g.n_players
        for p in all_profiles(g):
            full = PlayerSubset.of(N, range(N))
            assert math.isclose(subgame_potential(g, p, full), rosenthal_potential(g, p))
            assert subgame_potential(g, p, PlayerSubset.of(N, [])) == 0
            F = PlayerSubset(tuple(bool(b) for b in rng.integers(0, 2, N)))
            phi = rosenthal_potential(g, p)
            phiF = subgame_potential(g, p, F)
            phiC = subgame_potential(g, p, F.complement())
            assert phiF <= phi + 1e-9
            assert phi <= phiF + phiC + 1e-9


def test_load_consistency():
    for g in small_games(20, seed=7):
        p = StrategyProfile.from_choices(g, [0] * g.n_players)
        for u in range(g.n_players):
            for k in range(len(g.strategies[u])):
                p = p.with_choice(g, u, k)
                assert p == StrategyProfile.from_choices(g, p.choices)
                assert all(0 <= x <= g.n_players for x in p.loads)


# --- best responses -------------------------------------------------------------------------

def test_best_response_examples(pair):
    p = StrategyProfile.from_choices(pair, [0, 0])
    assert best_response(pair, p, 0) == (1, 1.0)
    c = CostFunction.constant(2)
    flat = CongestionGame.build([c, c, c], [[[0], [1], [2]]])
    assert best_response(flat, StrategyProfile.from_choices(flat, [2]), 0)[0] == 0


def test_best_response_is_scan_minimum():
    for g in small_games(30, seed=8):
        for p in all_profiles(g):
            for u in range(g.n_players):
                k, c = best_response(g, p, u)
                scan = [deviation_cost(g, p, u, j) for j in range(len(g.strategies[u]))]
                assert math.isclose(c, min(scan))
                assert k == int(np.argmin(scan)) or math.isclose(scan[k], min(scan))


def test_optimistic_cost():
    one = CostFunction.constant(1)
    g = CongestionGame.build([one, one], [[[0], [1]]])
    assert optimistic_cost(g, 0) == 1
    three = CostFunction.constant(3)
    g = CongestionGame.build([one, one, three], [[[0, 1], [2]]])
    assert optimistic_cost(g, 0) == 2
    for g in small_games(20, seed=9):
        for u in range(g.n_players):
            alone = CongestionGame.build(g.resources, [g.strategies[u]])
            p = StrategyProfile.from_choices(alone, [0])
            k, c = best_response(alone, p, 0)
            assert math.isclose(optimistic_cost(g, u), c)


# --- equilibrium verification ---------------------------------------------------------------

def test_verify_alpha_examples(pair):
    assert verify_alpha_equilibrium(pair, StrategyProfile.from_choices(pair, [0, 1]), 1).holds
    chk = verify_alpha_equilibrium(pair, StrategyProfile.from_choices(pair, [0, 0]), 1)
    assert not chk.holds and chk.worst_ratio == 2
    assert verify_alpha_equilibrium(pair, StrategyProfile.from_choices(pair, [0, 0]), 1e12).holds
    with pytest.raises(GameError):
        verify_alpha_equilibrium(pair, StrategyProfile.from_choices(pair, [0, 1]), 0.5)


def test_zero_cost_conventions():
    z = CostFunction.table([0, 0])
    g = CongestionGame.build([z, z], [[[0], [1]], [[0], [1]]])
    assert verify_alpha_equilibrium(g, StrategyProfile.from_choices(g, [0, 0]), 1).holds
    g = CongestionGame.build([CostFunction.table([1, 1]), z], [[[0], [1]], [[0], [1]]])
    chk = verify_alpha_equilibrium(g, StrategyProfile.from_choices(g, [0, 0]), 1)
    assert not chk.holds and chk.worst_ratio == math.inf


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10 ** 6), alpha=st.floats(1.0, 4.0))
def test_verify_matches_definition(seed, alpha):
    g = random_game(3, 3, 1, seed=seed)
    for p in all_profiles(g):
        ok = all(alpha * deviation_cost(g, p, u, k) * (1 + 1e-9) >= player_cost(g, p, u)
                 for u in range(g.n_players) for k in range(len(g.strategies[u])))
        assert verify_alpha_equilibrium(g, p, alpha).holds == ok
