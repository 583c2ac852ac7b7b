"""
Congestion games, potentials and approximate equilibria
=======================================================

Build a small game, walk through its profiles and check which of them are
(approximate) pure Nash equilibria.
"""

# %%
import itertools

from cgsmooth import (CongestionGame, CostFunction, StrategyProfile, best_response,
                      player_cost, rosenthal_potential, social_cost, verify_alpha_equilibrium)

# Two parallel links with f(x) = x and a slower shared link 2 + x.
lin = CostFunction.monomial(1)
slow = CostFunction.polynomial([2.0, 1.0])
game = CongestionGame.build([lin, lin, slow], [[[0], [2]], [[1], [2]], [[0], [1]]])
print(game.n_players, "players,", game.n_resources, "resources,", game.n_profiles, "profiles")

# %%
# Every profile with its social cost, Rosenthal potential and equilibrium status.
for choices in itertools.product(*(range(len(s)) for s in game.strategies)):
    p = StrategyProfile.from_choices(game, choices)
    chk = verify_alpha_equilibrium(game, p, 1.0)
    print(choices, "loads", p.loads, "cost", social_cost(game, p),
          "phi", rosenthal_potential(game, p), "PNE" if chk.holds else f"ratio {chk.worst_ratio:.3f}")

# %%
# Best-response dynamics from the worst profile: every strict improvement
# lowers the potential, so the loop ends at a PNE.
p = StrategyProfile.from_choices(game, [1, 1, 1])
moved = True
while moved:
    moved = False
    for u in range(game.n_players):
        k, alt = best_response(game, p, u)
        if alt < player_cost(game, p, u):
            q = p.with_choice(game, u, k)
            print(f"player {u} -> strategy {k}: phi {rosenthal_potential(game, p)} -> "
                  f"{rosenthal_potential(game, q)}")
            p, moved = q, True
            break
print("final", p.choices, "PNE:", verify_alpha_equilibrium(game, p, 1.0).holds)

# %%
# Games round-trip through JSON (the format used by the command line).
assert CongestionGame.from_json(game.to_json()) == game
