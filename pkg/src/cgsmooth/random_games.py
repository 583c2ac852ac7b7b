"""Seeded random instances for tests, demos and the ``random-game`` command."""

from __future__ import annotations

import numpy as np

from .game import CongestionGame, CostFunction


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_monomial_costs(n_resources: int, degree: int, seed=None,
                          coeff_range: tuple[float, float] = (1.0, 10.0)) -> list[CostFunction]:
    """``a_e x^d`` with ``a_e`` log-uniform in ``coeff_range``."""
    rng = _rng(seed)
    lo, hi = np.log(coeff_range[0]), np.log(coeff_range[1])
    return [CostFunction.monomial(degree, float(np.exp(rng.uniform(lo, hi)))) for _ in range(n_resources)]


def random_singleton_game(n_players: int, n_resources: int, degree: int = 1, seed=None,
                          max_strategies: int | None = None) -> CongestionGame:
    """Every player picks from a random non-empty set of single resources."""
    rng = _rng(seed)
    costs = random_monomial_costs(n_resources, degree, rng)
    cap = n_resources if max_strategies is None else min(max_strategies, n_resources)
    strategies = []
    for _ in range(n_players):
        k = int(rng.integers(1, cap + 1))
        strategies.append([[int(e)] for e in rng.choice(n_resources, size=k, replace=False)])
    return CongestionGame.build(costs, strategies)


def random_game(n_players: int, n_resources: int, degree: int = 1, seed=None,
                max_strategies: int = 3, max_size: int = 3) -> CongestionGame:
    """Players with up to ``max_strategies`` random resource subsets of size up to ``max_size``."""
    rng = _rng(seed)
    costs = random_monomial_costs(n_resources, degree, rng)
    size_cap = min(max_size, n_resources)
    strategies = []
    for _ in range(n_players):
        seen: set[tuple[int, ...]] = set()
        for _ in range(int(rng.integers(1, max_strategies + 1))):
            size = int(rng.integers(1, size_cap + 1))
            seen.add(tuple(sorted(int(e) for e in rng.choice(n_resources, size=size, replace=False))))
        strategies.append(sorted(seen))
    return CongestionGame.build(costs, strategies)
