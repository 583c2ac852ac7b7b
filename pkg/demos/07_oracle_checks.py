"""
Ground truth by enumeration
===========================

On small games every profile can be listed, which gives exact equilibria,
price of anarchy and stretch, and a grid search that double-checks the LPs.
"""

# %%
from cgsmooth import (POTENTIAL, SOCIAL_COST, CongestionGame, CostFunction, bruteforce_lambda,
                      certificate_for_game, derive_params, enumerate_equilibria, exact_poa,
                      exact_stretch, feasible_c)
from cgsmooth.oracle import subset_stretch_violations
from cgsmooth.smoothness import solve_lp_phi, solve_lp_sc

lin = CostFunction.monomial(1)
strategies = [[[i, 3 + i], [(i + 1) % 3, (i + 2) % 3, 3 + (i + 1) % 3]] for i in range(3)]
g = CongestionGame.build([lin] * 6, strategies)
print("equilibria:", [p.choices for p in enumerate_equilibria(g)])
print("PoA", exact_poa(g), "stretch", round(exact_stretch(g), 4))

# %%
# Stretch of q-equilibria under the modified costs against theta(q), for
# every subset of players with the others frozen.
cert = certificate_for_game(g)
prm = derive_params(cert.lam, 0.25, g.n_players, c_override=feasible_c(cert.lam, 0.25, g.n_players))
checked, bad = subset_stretch_violations(g, cert, prm.q, prm.theta_q)
print(f"q={prm.q:.4f} theta={prm.theta_q:.4f}: {checked} (profile, subset) pairs, {len(bad)} violations")

# %%
# Grid search over modified tables for N = 2 brackets the LP optimum.
for d in (1, 2):
    f = CostFunction.monomial(d)
    for family, lp in ((POTENTIAL, solve_lp_phi(f, 2)[0]), (SOCIAL_COST, solve_lp_sc(f, 2)[0])):
        bf = bruteforce_lambda(f, 2, family)
        print(f"d={d} {family:11s} LP {lp:.6f}  grid {bf.lam:.6f}  (step {bf.step:.1e})")
