import itertools

import numpy as np
import pytest

from cgsmooth.game import CongestionGame, CostFunction, StrategyProfile
from cgsmooth.random_games import random_game, random_singleton_game


def linear_pair() -> CongestionGame:
    """Two players, two identical resources with f(x) = x."""
    lin = CostFunction.monomial(1)
    return CongestionGame.build([lin, lin], [[[0], [1]], [[0], [1]]])


def constant_pair(value: float = 3.0) -> CongestionGame:
    c = CostFunction.constant(value)
    return CongestionGame.build([c, c], [[[0], [1]], [[0], [1]]])


def all_profiles(game: CongestionGame):
    for choices in itertools.product(*(range(len(s)) for s in game.strategies)):
        yield StrategyProfile.from_choices(game, choices)


@pytest.fixture
def pair():
    return linear_pair()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def small_games(n: int, seed: int, max_players: int = 4, degree: int = 1):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        N = int(rng.integers(1, max_players + 1))
        m = int(rng.integers(2, 5))
        if rng.random() < 0.5:
            yield random_singleton_game(N, m, degree, rng)
        else:
            yield random_game(N, m, degree, rng, max_strategies=3, max_size=2)
