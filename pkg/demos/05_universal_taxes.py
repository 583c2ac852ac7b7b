"""
Universal taxes
===============

Taxes ``t = f' - f`` from the social-cost certificate depend only on the load
and the cost function, never on the instance.  Taxes are refunded, so the
social cost is always measured with ``f``.
"""

# %%
import numpy as np

from cgsmooth import SOCIAL_COST, CongestionGame, CostFunction, monomial_certificate, taxes_from_certificate
from cgsmooth.oracle import exact_poa, optimum_social_cost
from cgsmooth.random_games import random_game, random_singleton_game
from cgsmooth.taxes import epsilon_local_search, poa_under_taxes

taxes = taxes_from_certificate(monomial_certificate(1, SOCIAL_COST))
print("lambda", round(taxes.lam, 6))
print("t(1..8) for f(x) = x:", taxes.taxes[0][1:9].round(4))

# %%
# Local search on the taxed costs from the optimistic profile; a player moves
# only when its taxed cost drops by more than a factor 1 + eps/(2N).
rng = np.random.default_rng(3)
worst = 0.0
for _ in range(20):
    g = random_singleton_game(int(rng.integers(2, 9)), 4, 1, rng)
    res = epsilon_local_search(g, taxes.taxed_costs(g), 0.1)
    worst = max(worst, res.social_cost / optimum_social_cost(g)[0])
print(f"worst local-search ratio over 20 games: {worst:.4f} (certified {taxes.lam:.4f})")

# %%
# The classic three-player instance with PoA 5/2: under the taxes its bad
# equilibrium disappears.
lin = CostFunction.monomial(1)
strategies = [[[i, 3 + i], [(i + 1) % 3, (i + 2) % 3, 3 + (i + 1) % 3]] for i in range(3)]
g = CongestionGame.build([lin] * 6, strategies)
print(f"PoA untaxed {exact_poa(g):.4f}   taxed {poa_under_taxes(g, taxes.taxed_costs(g)):.4f}")

# %%
# Taxes are not free on every instance: some games get slightly worse, but
# never beyond the certified lambda.
rng = np.random.default_rng(5)
for _ in range(40):
    g = random_game(5, 4, 1, rng)
    before, after = exact_poa(g), poa_under_taxes(g, taxes.taxed_costs(g))
    if max(before, after) > 1.05:
        print(f"PoA untaxed {before:.4f}   taxed {after:.4f}")
