"""Universal load-dependent taxes ``t_e(n) = f'_e(n) - f_e(n)`` and local search on them.

Taxes are refundable: players minimise ``f + t = f'`` while the social cost
is always measured with the original ``f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .game import (CongestionGame, StrategyProfile, _best_response, _cost_at, optimistic_profile,
                   rosenthal_potential, social_cost)
from .oracle import MAX_PROFILES, exact_poa
from .smoothness import SOCIAL_COST, SmoothnessCertificate

DEFAULT_MOVE_CAP = 1_000_000


class TaxError(ValueError):
    pass


@dataclass(frozen=True)
class TaxTable:
    """Per-resource taxes over loads ``0..n`` (entry 0 is unused and 0).

    With ``degree`` set and a single table, the taxes are those of ``x^d`` and
    apply to any resource ``a_0 + a x^d`` as ``a t``.
    """

    taxes: tuple[np.ndarray, ...]
    lam: float
    degree: int | None = None

    def taxed_costs(self, game: CongestionGame) -> list[np.ndarray]:
        """Taxed costs ``f + t`` over loads ``0..N``."""
        base = game.cost_tables()
        N = game.n_players
        taxes = self.taxes
        if len(taxes) == 1 and self.degree is not None and len(base) != 1:
            taxes = tuple(_monomial_scale(c, self.degree, e) * taxes[0]
                          for e, c in enumerate(game.resources))
        if len(taxes) != len(base):
            raise TaxError("one tax table per resource is required")
        out = []
        for e, (f, t) in enumerate(zip(base, taxes)):
            if t.shape[0] < N + 1:
                raise TaxError(f"tax table of resource {e} covers loads < {N}")
            out.append(f[: N + 1] + t[: N + 1])
        return out

    def to_json(self) -> dict[str, Any]:
        data: dict[str, Any] = {"taxes": [t[1:].tolist() for t in self.taxes], "lambda": self.lam}
        if self.degree is not None:
            data["degree"] = self.degree
        return data

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> TaxTable:
        try:
            tables = tuple(np.concatenate([[0.0], np.asarray(t, dtype=float)]) for t in data["taxes"])
            degree = data.get("degree")
            return cls(tables, float(data["lambda"]), None if degree is None else int(degree))
        except (KeyError, TypeError, ValueError) as exc:
            raise TaxError(f"malformed tax JSON: {exc}") from exc

    def __eq__(self, other) -> bool:
        if not isinstance(other, TaxTable):
            return NotImplemented
        return (self.lam == other.lam and self.degree == other.degree
                and len(self.taxes) == len(other.taxes)
                and all(np.array_equal(a, b) for a, b in zip(self.taxes, other.taxes)))


def _monomial_scale(c, d: int, e: int) -> float:
    """``a`` for a resource ``a_0 + a x^d``."""
    if c.kind == "table" or c.degree > d or any(a != 0 for a in c.coeffs[1:d]):
        raise TaxError(f"resource {e} is not of the form a0 + a x^{d}")
    return float(c.coeffs[d]) if c.degree == d else 0.0


def taxes_from_certificate(cert: SmoothnessCertificate) -> TaxTable:
    """``t = f' - f`` pointwise over each certificate table."""
    if cert.objective != SOCIAL_COST:
        raise TaxError("taxes come from a social-cost certificate")
    taxes = []
    for fp, c in zip(cert.fprime, cert.costs):
        n = fp.shape[0] - 1
        if c.n_max is not None:
            n = min(n, c.n_max)
        f = c.table_upto(n).copy()
        f[0] = 0.0
        t = fp[: n + 1] - f
        t[0] = 0.0
        taxes.append(t)
    degree = cert.degree if len(taxes) == 1 else None
    return TaxTable(tuple(taxes), cert.lam, degree)


def zeta_sc(game: CongestionGame, fprime, profile: StrategyProfile) -> float:
    """``sum_e sum_{i <= n_e} f'_e(i)``, the pseudo-potential of the taxed game."""
    return rosenthal_potential(game, profile, fprime)


@dataclass
class LocalSearchResult:
    profile: StrategyProfile
    local_alpha: float  # worst f'-deviation ratio at the end
    moves: int
    zeta_trace: list[float]
    social_cost: float


def epsilon_local_search(game: CongestionGame, fprime, epsilon: float,
                         start: StrategyProfile | None = None,
                         move_cap: int = DEFAULT_MOVE_CAP) -> LocalSearchResult:
    """Big-step best-response dynamics under the taxed costs.

    A player moves (to its taxed best response) only when that lowers its
    taxed cost by a factor above ``1 + eps/(2N)``; players are scanned in index
    order and the first eligible one moves.  Starts at the optimistic profile.
    """
    if not epsilon > 0:
        raise TaxError("epsilon must be positive")
    fp = game.cost_tables(fprime)
    N = game.n_players
    gain = epsilon / (2 * N)
    profile = start if start is not None else optimistic_profile(game)
    trace = [rosenthal_potential(game, profile, fp)]
    moves = 0
    while True:
        moved = False
        for u in range(N):
            cur = _cost_at(fp, game.strategies[u][profile.choices[u]], profile.loads)
            k, alt = _best_response(game, fp, profile, u)
            if k != profile.choices[u] and cur > (1 + gain) * alt:
                profile = profile.with_choice(game, u, k)
                trace.append(rosenthal_potential(game, profile, fp))
                moves += 1
                moved = True
                break
        if not moved:
            break
        if moves >= move_cap:
            raise RuntimeError(f"local search exceeded {move_cap} moves")
    worst = 1.0
    for u in range(N):
        cur = _cost_at(fp, game.strategies[u][profile.choices[u]], profile.loads)
        alt = _best_response(game, fp, profile, u)[1]
        worst = max(worst, math.inf if alt == 0 and cur > 0 else (cur / alt if alt > 0 else 1.0))
    return LocalSearchResult(profile, worst, moves, trace, social_cost(game, profile))


def poa_under_taxes(game: CongestionGame, fprime, cap: int = MAX_PROFILES) -> float:
    """Exact price of anarchy when players face ``fprime`` but cost is measured with ``f``."""
    return exact_poa(game, fprime, cap=cap)
