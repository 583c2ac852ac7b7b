"""
The LP layer
============

A tiny program solved by both backends, then the same program grown lazily
from an oracle that hands out violated rows on demand.
"""

# %%
import numpy as np
import scipy.sparse as sp

from cgsmooth import LinearProgram, solve, solve_lazy
from cgsmooth.lp import CutBatch

# min -x - y  s.t.  x + 2y <= 4,  3x + y <= 6,  x, y >= 0
lp = LinearProgram(2, np.array([-1.0, -1.0]))
lp.add_constraint([1.0, 2.0], "<=", 4.0)
lp.add_constraint([3.0, 1.0], "<=", 6.0)
for backend in ("highs", "simplex"):
    res = solve(lp, backend)
    print(f"{backend:8s} {res.status.value} objective {res.objective:.6f} x {np.round(res.x, 6)}")
print(lp.to_text())

# %%
# Lazy generation: approximate the unit disc by tangent cuts.  The oracle
# only returns the tangent at the current point when it lies outside.
core = LinearProgram(2, np.array([-1.0, -2.0]), lower=np.array([-2.0, -2.0]),
                     upper=np.array([2.0, 2.0]))


def tangent_cut(x):
    r = np.hypot(*x)
    if r <= 1 + 1e-9:
        return None
    d = x / r
    return CutBatch(sp.csr_matrix(d.reshape(1, -1)), "<=", np.array([1.0]))


res = solve_lazy(core, tangent_cut, max_rounds=200)
print("lazy rounds", res.rounds, "objective", round(res.objective, 6),
      "exact", round(-np.sqrt(5), 6))
