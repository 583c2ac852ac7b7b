"""
Computing approximate equilibria
================================

Players are grouped into blocks by their optimistic cost.  Block ``i`` makes
big moves under the original costs while block ``i+1`` settles under the
modified costs; the result is certified by a full deviation scan.
"""

# %%
import numpy as np

from cgsmooth import (POTENTIAL, CongestionGame, CostFunction, derive_params, feasible_c, fit_certificate, monomial_certificate,
                      run, verify_alpha_equilibrium)
from cgsmooth.algorithm import min_admissible_c, theoretical_c
from cgsmooth.random_games import random_singleton_game

lam, eps, N = monomial_certificate(1, POTENTIAL).lam, 0.25, 20
print(f"theoretical c = {theoretical_c(lam, eps):.1f} (N^c = {float(N) ** theoretical_c(lam, eps):.3g})")
print(f"smallest admissible c = {min_admissible_c(lam, N):.3f}, "
      f"smallest c meeting lambda(1+eps) = {feasible_c(lam, eps, N):.3f}")
prm = derive_params(lam, eps, N, c_override=feasible_c(lam, eps, N))
print(f"q={prm.q:.6f} theta={prm.theta_q:.4f} p={prm.p:.4f} bound={prm.alpha_bound:.4f}")

# %%
rng = np.random.default_rng(7)
game = random_singleton_game(20, 5, 1, rng)
cert = fit_certificate(monomial_certificate(1, POTENTIAL), game)
res = run(game, cert, eps, c_override=feasible_c(cert.lam, eps, game.n_players))
print(f"{len(res.moves)} moves over {len(res.phases)} phase(s), z_hat={res.blocks.z_hat}")
for m in res.moves[:8]:
    print(f"  phase {m.phase} player {m.player:2d} {m.kind}-move cost {m.cost_before:.2f} -> "
          f"{m.cost_after:.2f}  phi~ {m.phi_tilde_before:.1f} -> {m.phi_tilde_after:.1f}")
print("certified alpha", round(res.certified_alpha, 4), "<= lambda(1+eps) =", round(cert.lam * 1.25, 4))
assert verify_alpha_equilibrium(game, res.profile, res.certified_alpha).holds

# %%
# Costs spread over many orders of magnitude produce several blocks.
costs = [CostFunction.monomial(1, a) for a in (1.0, 1e5, 1e10)]
game = CongestionGame.build(costs, [[[0]], [[0], [1]], [[1], [2]], [[2]], [[2]], [[1], [2]]])
cert = fit_certificate(monomial_certificate(1, POTENTIAL), game)
res = run(game, cert, 1.0, c_override=feasible_c(cert.lam, 1.0, game.n_players))
print("blocks", res.blocks.block_of, "phases", [(ph.index, ph.moves) for ph in res.phases],
      "alpha", round(res.certified_alpha, 4))
print(res.to_json())
