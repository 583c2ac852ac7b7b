"""
Optimal modified costs
======================

For a cost function ``f`` the smoothness LP picks modified costs ``f'`` with
the smallest ``lambda``.  Finite LPs cover games with ``N`` players; the
truncated LP with a polynomial tail covers every ``N`` at once.
"""

# %%
import numpy as np

from cgsmooth import (POTENTIAL, SOCIAL_COST, CongestionGame, CostFunction, certificate_for_game,
                      monomial_certificate, verify_certificate)
from cgsmooth.smoothness import solve_lp_phi, solve_lp_sc, solve_lp_sc_lazy, verify_tail_lemma

lin = CostFunction.monomial(1)
print(" N   potential   social cost")
for N in (2, 5, 10, 20, 40):
    print(f"{N:2d}   {solve_lp_phi(lin, N)[0]:.6f}    {solve_lp_sc(lin, N, monotone_top=True)[0]:.6f}")

# %%
# Large N: the social-cost LP by row generation only materialises the rows
# that end up mattering.
lazy = solve_lp_sc_lazy(lin, 600)
print(f"N=600 lambda {lazy.lam:.7f} after {lazy.rounds} rounds with {len(lazy.active)} rows")

# %%
# Certificates for x^d valid for every number of players (tables up to K,
# nu * n^d beyond).  Each one is re-checked constraint by constraint.
for family in (POTENTIAL, SOCIAL_COST):
    for d in (1, 2, 3):
        cert = monomial_certificate(d, family)
        check = verify_certificate(cert)
        print(f"{family:11s} d={d} lambda={cert.lam:.6f} K={cert.K} nu={cert.nu:.4f} valid={check.valid}")
# The closed-form tail inequality holds from this load on (well below K).
print("tail inequality holds from load", verify_tail_lemma(1, monomial_certificate(1, POTENTIAL).lam,
                                                          POTENTIAL, scan=10 ** 4))

# %%
# Modified costs are sandwiched: f <= f' <= lambda f.
cert = monomial_certificate(1, POTENTIAL)
n = np.arange(1, 11)
print(np.column_stack([n, cert.fprime[0][1:11], cert.lam * n]).round(4))

# %%
# A game with mixed costs: polynomials reuse the monomial certificates,
# tables get a finite LP over the game's player count.
g = CongestionGame.build([CostFunction.polynomial([1.0, 2.0, 0.5]), CostFunction.table([1, 2, 4, 8])],
                         [[[0], [1]]] * 3)
cert = certificate_for_game(g)
print("game lambda", round(cert.lam, 6), "valid", verify_certificate(cert).valid)
