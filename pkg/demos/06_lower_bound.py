"""
A matching lower bound
======================

The dual of the social-cost LP describes a selfish scheduling instance on
identical machines whose equilibrium is worse than a reference assignment by
the dual objective, whatever (non-decreasing) costs the machines charge.
"""

# %%
import numpy as np

from cgsmooth import (SOCIAL_COST, CostFunction, construct_instance, monomial_certificate, solve_lpd,
                      taxes_from_certificate, verify_gap)
from cgsmooth.lowerbound import h_social, primal_dual_pair

f = CostFunction.monomial(1)
for N in (10, 30, 60):
    primal, dual = primal_dual_pair(f, N)
    print(f"N={N:2d} primal {primal:.8f} dual {dual:.8f}")

# %%
dual = solve_lpd((f, 60))
print("dual support (n, m, y):")
for n, m, y in dual.support()[:12]:
    print(f"  {n:2d} {m:2d} {y:.6f}")

# %%
inst = construct_instance(dual, 0.01)
h = h_social(f, 60)
rep = verify_gap(inst, h)
print(f"M={inst.M} machines={inst.n_machines} players={inst.n_players}")
print(f"equilibrium is a PNE: {rep.eq_is_pne}, cost ratio {rep.ratio:.5f}")

# %%
# The equilibrium survives any non-decreasing machine cost, for instance the
# taxed costs f + t.
t = taxes_from_certificate(monomial_certificate(1, SOCIAL_COST)).taxes[0]
taxed = np.arange(t.size) + t
print("PNE under taxes:", verify_gap(inst, h, fprime=taxed).eq_is_pne)
