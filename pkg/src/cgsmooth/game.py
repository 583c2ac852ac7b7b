"""Congestion games with explicit strategy sets.

Costs, Rosenthal potentials, best responses and equilibrium checks.  Every
evaluation takes an optional ``fprime`` argument: ``None`` means the original
resource costs, otherwise a per-resource table of modified costs indexed by
load (``fprime[e][k]`` is the modified cost of resource ``e`` at load ``k``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

# Comparison tolerance for "improving move" decisions (relative).
MOVE_TOL = 1e-9


class GameError(ValueError):
    """Malformed game, profile or cost function."""


class LoadOutOfRange(GameError, IndexError):
    """A table cost function was evaluated beyond its supported load."""


@dataclass(frozen=True)
class CostFunction:
    """Non-negative, non-decreasing resource cost ``f(1..n_max)``.

    ``kind`` is ``"table"`` (explicit values), ``"monomial"`` or
    ``"polynomial"`` (non-negative coefficients ``a_0..a_d``); a polynomial
    with a single non-zero term is stored as a monomial.  Polynomials are
    defined for every load, so their ``n_max`` is ``None``.
    """

    kind: str
    values: tuple[float, ...] = ()
    coeffs: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "table":
            v = np.asarray(self.values, dtype=float)
            if v.size == 0:
                raise GameError("table cost function needs at least one value")
            if not np.all(np.isfinite(v)) or np.any(v < 0):
                raise GameError("table costs must be finite and non-negative")
            if np.any(np.diff(v) < 0):
                raise GameError("table costs must be non-decreasing")
        elif self.kind in ("monomial", "polynomial"):
            a = np.asarray(self.coeffs, dtype=float)
            if a.size == 0:
                raise GameError("polynomial cost function needs coefficients")
            if not np.all(np.isfinite(a)) or np.any(a < 0):
                raise GameError("polynomial coefficients must be finite and non-negative")
            if self.kind == "monomial" and np.count_nonzero(a[:-1]) > 0:
                raise GameError("monomial has a single (leading) coefficient")
            # the kind is canonical, so JSON round trips compare equal
            object.__setattr__(self, "kind", "polynomial" if np.count_nonzero(a[:-1]) else "monomial")
        else:
            raise GameError(f"unknown cost kind {self.kind!r}")

    @classmethod
    def table(cls, values: Iterable[float]) -> CostFunction:
        return cls("table", values=tuple(float(x) for x in values))

    @classmethod
    def polynomial(cls, coeffs: Iterable[float]) -> CostFunction:
        return cls("polynomial", coeffs=tuple(float(x) for x in coeffs))

    @classmethod
    def monomial(cls, degree: int, coeff: float = 1.0) -> CostFunction:
        return cls("monomial", coeffs=(0.0,) * degree + (float(coeff),))

    @classmethod
    def constant(cls, value: float = 1.0) -> CostFunction:
        return cls.polynomial([value])

    @property
    def n_max(self) -> int | None:
        return len(self.values) if self.kind == "table" else None

    @property
    def degree(self) -> int | None:
        """Polynomial degree (highest non-zero coefficient), ``None`` for tables."""
        if self.kind == "table":
            return None
        nz = np.nonzero(np.asarray(self.coeffs))[0]
        return int(nz[-1]) if nz.size else 0

    def __call__(self, load):
        """Evaluate at integer load(s).  ``f(0)`` is 0 for tables by convention."""
        x = np.asarray(load)
        if self.kind == "table":
            xi = x.astype(int)
            if np.any(xi < 0) or np.any(xi > len(self.values)):
                raise LoadOutOfRange(f"load {load} outside table range [0, {len(self.values)}]")
            table = np.concatenate(([0.0], np.asarray(self.values, dtype=float)))
            out = table[xi]
        else:
            out = np.polynomial.polynomial.polyval(x.astype(float), np.asarray(self.coeffs))
        return float(out) if np.ndim(out) == 0 else out

    def table_upto(self, n: int) -> np.ndarray:
        """Array ``t`` of length ``n + 1`` with ``t[k] = f(k)`` (``t[0]`` per ``__call__``)."""
        return np.asarray(self(np.arange(n + 1)), dtype=float)

    def to_json(self) -> dict[str, Any]:
        if self.kind == "table":
            return {"kind": "table", "values": list(self.values)}
        return {"kind": "poly", "coeffs": list(self.coeffs)}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> CostFunction:
        kind = data.get("kind")
        if kind == "table":
            return cls.table(data["values"])
        if kind in ("poly", "polynomial"):
            return cls.polynomial(data["coeffs"])
        raise GameError(f"unknown cost kind {kind!r}")


@dataclass(frozen=True)
class CongestionGame:
    """Players with explicit strategy sets over a shared pool of resources.

    ``strategies[u][k]`` is the sorted tuple of resource indices of player
    ``u``'s ``k``-th strategy.
    """

    resources: tuple[CostFunction, ...]
    strategies: tuple[tuple[tuple[int, ...], ...], ...]

    def __post_init__(self) -> None:
        n_res = len(self.resources)
        for u, strats in enumerate(self.strategies):
            if not strats:
                raise GameError(f"player {u} has no strategies")
            for s in strats:
                if not s:
                    raise GameError(f"player {u} has an empty strategy")
                if len(set(s)) != len(s) or min(s) < 0 or max(s) >= n_res:
                    raise GameError(f"player {u} has an invalid strategy {s}")
        for e, f in enumerate(self.resources):
            if f.n_max is not None and f.n_max < len(self.strategies):
                raise GameError(f"resource {e} supports {f.n_max} < {len(self.strategies)} players")

    @classmethod
    def build(cls, resources: Sequence[CostFunction],
              strategies: Sequence[Sequence[Iterable[int]]]) -> CongestionGame:
        strats = tuple(tuple(tuple(sorted(int(e) for e in s)) for s in player) for player in strategies)
        return cls(tuple(resources), strats)

    @property
    def n_players(self) -> int:
        return len(self.strategies)

    @property
    def n_resources(self) -> int:
        return len(self.resources)

    @property
    def n_profiles(self) -> int:
        return math.prod(len(s) for s in self.strategies)

    def used_resources(self) -> list[int]:
        return sorted({e for strats in self.strategies for s in strats for e in s})

    def cost_tables(self, fprime=None) -> list[np.ndarray]:
        """Per-resource cost arrays over loads ``0..N`` for the requested family."""
        n = self.n_players
        if fprime is None:
            # resources with equal cost functions share one read-only table
            shared: dict[CostFunction, np.ndarray] = {}
            for f in self.resources:
                if f not in shared:
                    t = np.array(f.table_upto(n), dtype=float)
                    t.setflags(write=False)
                    shared[f] = t
            return [shared[f] for f in self.resources]
        if hasattr(fprime, "extended"):
            fprime = fprime.extended(n)
        tables = getattr(fprime, "fprime", fprime)
        out = []
        for e, t in enumerate(tables):
            t = np.asarray(t, dtype=float)
            if t.shape[0] < n + 1:
                raise LoadOutOfRange(f"modified cost table of resource {e} covers loads < {n}")
            out.append(t)
        return out

    def to_json(self) -> dict[str, Any]:
        return {
            "resources": [f.to_json() for f in self.resources],
            "players": [{"strategies": [list(s) for s in strats]} for strats in self.strategies],
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> CongestionGame:
        try:
            resources = [CostFunction.from_json(r) for r in data["resources"]]
            strategies = [p["strategies"] for p in data["players"]]
        except (KeyError, TypeError) as exc:
            raise GameError(f"malformed game JSON: {exc}") from exc
        return cls.build(resources, strategies)


@dataclass(frozen=True)
class StrategyProfile:
    """One strategy index per player plus the induced resource loads."""

    choices: tuple[int, ...]
    loads: tuple[int, ...]

    @classmethod
    def from_choices(cls, game: CongestionGame, choices: Sequence[int]) -> StrategyProfile:
        choices = tuple(int(c) for c in choices)
        if len(choices) != game.n_players:
            raise GameError(f"profile has {len(choices)} choices for {game.n_players} players")
        loads = [0] * game.n_resources
        for u, k in enumerate(choices):
            if not 0 <= k < len(game.strategies[u]):
                raise GameError(f"player {u} has no strategy {k}")
            for e in game.strategies[u][k]:
                loads[e] += 1
        return cls(choices, tuple(loads))

    def with_choice(self, game: CongestionGame, player: int, strategy: int) -> StrategyProfile:
        """Profile where only ``player`` switches to ``strategy``."""
        if not 0 <= strategy < len(game.strategies[player]):
            raise GameError(f"player {player} has no strategy {strategy}")
        loads = list(self.loads)
        for e in game.strategies[player][self.choices[player]]:
            loads[e] -= 1
        for e in game.strategies[player][strategy]:
            loads[e] += 1
        choices = list(self.choices)
        choices[player] = strategy
        return StrategyProfile(tuple(choices), tuple(loads))

    def to_json(self) -> dict[str, Any]:
        return {"choices": list(self.choices)}

    @classmethod
    def from_json(cls, game: CongestionGame, data: dict[str, Any]) -> StrategyProfile:
        return cls.from_choices(game, data["choices"])


@dataclass(frozen=True)
class PlayerSubset:
    """Membership mask over the players of a game."""

    mask: tuple[bool, ...]

    @classmethod
    def of(cls, n_players: int, members: Iterable[int]) -> PlayerSubset:
        m = [False] * n_players
        for u in members:
            if not 0 <= u < n_players:
                raise GameError(f"player {u} outside [0, {n_players})")
            m[u] = True
        return cls(tuple(m))

    @property
    def members(self) -> list[int]:
        return [u for u, b in enumerate(self.mask) if b]

    def complement(self) -> PlayerSubset:
        return PlayerSubset(tuple(not b for b in self.mask))


def split_loads(game: CongestionGame, profile: StrategyProfile,
                subset: PlayerSubset) -> tuple[np.ndarray, np.ndarray]:
    """Loads ``(n^F_e(s), n^{N\\F}_e(s))`` of the members and of everybody else."""
    inside = np.zeros(game.n_resources, dtype=int)
    for u in subset.members:
        for e in game.strategies[u][profile.choices[u]]:
            inside[e] += 1
    return inside, np.asarray(profile.loads) - inside


def _tables(game: CongestionGame, fprime) -> list[np.ndarray]:
    return game.cost_tables(fprime)


def _cost_at(tables: list[np.ndarray], resources: Iterable[int], loads: Sequence[int]) -> float:
    total = 0.0
    for e in resources:
        t = tables[e]
        k = loads[e]
        if k >= t.shape[0]:
            raise LoadOutOfRange(f"load {k} on resource {e} exceeds table range {t.shape[0] - 1}")
        total += t[k]
    return float(total)


def player_cost(game: CongestionGame, profile: StrategyProfile, player: int, fprime=None) -> float:
    """``c_u(s)``: sum of the (modified) costs over the player's resources."""
    tables = _tables(game, fprime)
    return _cost_at(tables, game.strategies[player][profile.choices[player]], profile.loads)


def deviation_cost(game: CongestionGame, profile: StrategyProfile, player: int,
                   alt_strategy: int, fprime=None) -> float:
    """``c_u(s'_u, s_{-u})`` for a unilateral switch to ``alt_strategy``."""
    if not 0 <= alt_strategy < len(game.strategies[player]):
        raise GameError(f"player {player} has no strategy {alt_strategy}")
    tables = _tables(game, fprime)
    return _deviation_cost(game, tables, profile, player, alt_strategy)


def _deviation_cost(game, tables, profile, player, alt) -> float:
    current = game.strategies[player][profile.choices[player]]
    total = 0.0
    for e in game.strategies[player][alt]:
        k = profile.loads[e] + (0 if e in current else 1)
        t = tables[e]
        if k >= t.shape[0]:
            raise LoadOutOfRange(f"load {k} on resource {e} exceeds table range {t.shape[0] - 1}")
        total += t[k]
    return float(total)


def social_cost(game: CongestionGame, profile: StrategyProfile, fprime=None) -> float:
    """``c(s) = sum_e n_e f_e(n_e)``."""
    tables = _tables(game, fprime)
    return float(sum(k * tables[e][k] for e, k in enumerate(profile.loads) if k))


def rosenthal_potential(game: CongestionGame, profile: StrategyProfile, fprime=None) -> float:
    """``phi(s) = sum_e sum_{i<=n_e} f_e(i)``."""
    tables = _tables(game, fprime)
    return float(sum(tables[e][1:k + 1].sum() for e, k in enumerate(profile.loads) if k))


def subgame_potential(game: CongestionGame, profile: StrategyProfile, subset: PlayerSubset,
                      fprime=None) -> float:
    """Potential of the subgame of ``subset`` with everyone else frozen.

    ``phi^F(s) = sum_e sum_{i=1}^{n^F_e} f_e(i + n^{N\\F}_e)``.
    """
    tables = _tables(game, fprime)
    inside, outside = split_loads(game, profile, subset)
    return float(sum(tables[e][outside[e] + 1: outside[e] + inside[e] + 1].sum()
                     for e in range(game.n_resources) if inside[e]))


def best_response(game: CongestionGame, profile: StrategyProfile, player: int,
                  fprime=None) -> tuple[int, float]:
    """Cheapest unilateral strategy; near-ties go to the lowest index."""
    tables = _tables(game, fprime)
    return _best_response(game, tables, profile, player)


def _best_response(game, tables, profile, player) -> tuple[int, float]:
    best_k, best_c = 0, math.inf
    for k in range(len(game.strategies[player])):
        c = _deviation_cost(game, tables, profile, player, k)
        if c < best_c - MOVE_TOL * max(1.0, abs(best_c) if math.isfinite(best_c) else 1.0):
            best_k, best_c = k, c
    return best_k, best_c


def optimistic_cost(game: CongestionGame, player: int, fprime=None) -> float:
    """``l_u = c_u(BR_u(0))``: cheapest strategy when nobody else plays."""
    return optimistic_strategy(game, player, fprime)[1]


def optimistic_strategy(game: CongestionGame, player: int, fprime=None) -> tuple[int, float]:
    tables = _tables(game, fprime)
    best_k, best_c = 0, math.inf
    for k, s in enumerate(game.strategies[player]):
        c = float(sum(tables[e][1] for e in s))
        if c < best_c - MOVE_TOL * max(1.0, abs(best_c) if math.isfinite(best_c) else 1.0):
            best_k, best_c = k, c
    return best_k, best_c


def optimistic_profile(game: CongestionGame, fprime=None) -> StrategyProfile:
    """Every player on its best response against the empty profile."""
    return StrategyProfile.from_choices(
        game, [optimistic_strategy(game, u, fprime)[0] for u in range(game.n_players)])


def deviation_ratio(current: float, alternative: float) -> float:
    """``current / alternative`` with ``0/0 -> 1`` and ``x/0 -> inf``."""
    if alternative == 0.0:
        return 1.0 if current == 0.0 else math.inf
    return current / alternative


@dataclass(frozen=True)
class EquilibriumCheck:
    holds: bool
    worst_player: int
    worst_strategy: int
    worst_ratio: float


def verify_alpha_equilibrium(game: CongestionGame, profile: StrategyProfile, alpha: float,
                             fprime=None) -> EquilibriumCheck:
    """Check ``alpha * c_u(s'_u, s_{-u}) >= c_u(s)`` for every player and deviation."""
    if alpha < 1:
        raise GameError("alpha must be >= 1")
    tables = _tables(game, fprime)
    worst = (-1, -1, 1.0)
    for u in range(game.n_players):
        cur = _cost_at(tables, game.strategies[u][profile.choices[u]], profile.loads)
        for k in range(len(game.strategies[u])):
            if k == profile.choices[u]:
                continue
            r = deviation_ratio(cur, _deviation_cost(game, tables, profile, u, k))
            if r > worst[2]:
                worst = (u, k, r)
    holds = worst[2] <= alpha * (1 + MOVE_TOL)
    return EquilibriumCheck(holds, worst[0], worst[1], worst[2])
