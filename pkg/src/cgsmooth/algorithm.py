"""Block-phase best-response dynamics with original and modified costs.

Players are grouped into blocks by their optimistic cost ``l_u``.  Phase ``i``
lets block ``B_i`` make p-moves under the original costs ``f`` while block
``B_{i+1}`` makes q-moves under the modified costs ``f'``.  The thresholds are

    q = 1 + t,   theta(q) = lam / (1 - N lam t / (1 + t)),
    p = (1/theta(q) - (2 + t + 2 lam) t)^{-1},   t = N^{-c},

where ``t`` is carried separately so that ``q - 1`` survives when ``N^c`` is huge.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .game import (MOVE_TOL, CongestionGame, GameError, StrategyProfile, _best_response,
                   _cost_at, _deviation_cost, optimistic_profile, optimistic_strategy,
                   verify_alpha_equilibrium)
from .smoothness import POTENTIAL, SmoothnessCertificate

log = logging.getLogger(__name__)

DEFAULT_MOVE_CAP = 1_000_000


class ParameterInfeasible(ValueError):
    """``p`` is not a finite positive number for the requested ``c``."""

    def __init__(self, message: str, min_c: float | None):
        super().__init__(message)
        self.min_c = min_c


class DegeneratePlayerError(GameError):
    pass


class MoveCapExceeded(RuntimeError):
    def __init__(self, message: str, partial: RunResult):
        super().__init__(message)
        self.partial = partial


def theoretical_c(lam: float, epsilon: float) -> float:
    """``c = 10 log2(lam / eps)`` (never below 0)."""
    return max(0.0, 10.0 * math.log2(lam / epsilon))


def _thresholds(lam: float, N: int, t: float) -> tuple[float, float] | None:
    """``(theta(q), p)`` for ``t = N^{-c}``, or ``None`` when either is not positive and finite."""
    den_theta = 1.0 - N * lam * t / (1.0 + t)
    if den_theta <= 0:
        return None
    theta = lam / den_theta
    inv_p = 1.0 / theta - (2.0 + t + 2.0 * lam) * t
    if inv_p <= 0:
        return None
    return theta, 1.0 / inv_p


def _min_c(N: int, pred, c_hi: float = 1e4) -> float | None:
    """Smallest ``c`` (to 1e-9) with ``pred(N^{-c})``, assuming monotonicity in ``c``."""
    if N < 2 or not pred(N ** -c_hi):
        return None
    lo, hi = 0.0, c_hi
    if pred(1.0):
        return 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if pred(N ** -mid):
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-9:
            break
    return hi


def min_admissible_c(lam: float, N: int) -> float | None:
    """Smallest ``c`` for which ``p`` is finite and positive."""
    return _min_c(N, lambda t: _thresholds(lam, N, t) is not None)


def feasible_c(lam: float, epsilon: float, N: int) -> float:
    """Smallest ``c`` with ``p (1 + 5/N^c) <= lam (1 + eps)``."""
    def ok(t):
        th = _thresholds(lam, N, t)
        return th is not None and th[1] * (1.0 + 5.0 * t) <= lam * (1.0 + epsilon)
    c = _min_c(N, ok)
    if c is None:
        raise ParameterInfeasible(f"no c achieves p(1+5/N^c) <= lam(1+eps) for N={N}", None)
    return c


@dataclass(frozen=True)
class AlgoParams:
    """Thresholds of the dynamics; ``t = N^{-c}`` and ``q = 1 + t``."""

    lam: float
    epsilon: float
    N: int
    c: float
    t: float
    q: float
    theta_q: float
    p: float
    Delta: float

    @property
    def q_minus_1(self) -> float:
        return self.t

    @property
    def log_beta(self) -> float:
        """``ln(2 Delta N^{2c+2})``, the log of the block ratio."""
        return math.log(2.0) + math.log(self.Delta) + (2.0 * self.c + 2.0) * math.log(self.N)

    @property
    def alpha_bound(self) -> float:
        """``p (1 + 5/N^c)``."""
        return self.p * (1.0 + 5.0 * self.t)

    def to_json(self) -> dict[str, float]:
        return {"q": self.q, "p": self.p, "c": self.c, "Delta": self.Delta, "theta_q": self.theta_q}


def compute_delta(game: CongestionGame) -> float:
    """``max_e f_e(N) / f_e(1)`` over resources that appear in some strategy."""
    N = game.n_players
    delta = 1.0
    for e in game.used_resources():
        f = game.resources[e]
        f1, fN = float(f(1)), float(f(N))
        if f1 <= 0:
            raise DegeneratePlayerError(f"resource {e} has f(1) = 0; the cost spread is undefined")
        delta = max(delta, fN / f1)
    return delta


def derive_params(lam: float, epsilon: float, N: int, game: CongestionGame | None = None,
                  c_override: float | None = None, Delta: float | None = None) -> AlgoParams:
    """Thresholds for the given certificate ``lam`` and target ``epsilon``."""
    if lam < 1:
        raise ValueError("lambda must be at least 1")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if N < 1:
        raise ValueError("N must be at least 1")
    if Delta is None:
        Delta = compute_delta(game) if game is not None else 1.0
    c = theoretical_c(lam, epsilon) if c_override is None else float(c_override)
    log_t = -c * math.log(N) if N > 1 else 0.0
    t = math.exp(log_t)
    if t == 0.0 and c_override is None:
        warnings.warn(f"N^c = exp({-log_t:.1f}) overflows; q - 1 underflows to 0", RuntimeWarning)
    th = _thresholds(lam, N, t)
    if th is None:
        mc = min_admissible_c(lam, N)
        hint = "no c works for N = 1" if mc is None else f"minimal admissible c is {mc:.6g}"
        raise ParameterInfeasible(f"p is not finite and positive for c={c:.6g}, N={N}, lambda={lam:.6g}; {hint}", mc)
    theta, p = th
    return AlgoParams(lam=lam, epsilon=epsilon, N=N, c=c, t=t, q=1.0 + t, theta_q=theta, p=p,
                      Delta=float(Delta))


@dataclass(frozen=True)
class BlockStructure:
    """Blocks ``B_1..B_zhat`` (1-based indices in ``block_of``) and their boundaries."""

    z_hat: int
    block_of: tuple[int, ...]
    ells: tuple[float, ...]
    boundaries: tuple[float, ...]  # b_1..b_{zhat+1}, b_i = l_max beta^{-(i-1)}
    log_beta: float

    def members(self, i: int) -> list[int]:
        return [u for u, b in enumerate(self.block_of) if b == i]


def blocks_from_costs(ells, log_beta: float) -> BlockStructure:
    """``u in B_i  <=>  l_u in (l_max beta^{-i}, l_max beta^{-i+1}]``."""
    ells = np.asarray(ells, dtype=float)
    if np.any(ells <= 0):
        raise DegeneratePlayerError(f"player {int(np.argmin(ells))} has zero optimistic cost")
    if not log_beta > 0:
        raise ValueError("block ratio must exceed 1")
    lmax, lmin = float(ells.max()), float(ells.min())
    r = np.log(lmax / ells) / log_beta
    idx = np.floor(r).astype(int) + 1
    z_hat = 1 + int(math.ceil(math.log(lmax / lmin) / log_beta))
    bounds = tuple(lmax * math.exp(-(i - 1) * log_beta) for i in range(1, z_hat + 2))
    return BlockStructure(z_hat, tuple(int(i) for i in idx), tuple(float(x) for x in ells), bounds, float(log_beta))


def partition_blocks(game: CongestionGame, params: AlgoParams) -> BlockStructure:
    ells = [optimistic_strategy(game, u)[1] for u in range(game.n_players)]
    return blocks_from_costs(ells, params.log_beta)


def modified_potential(game: CongestionGame, loads, fprime_tables) -> float:
    """``phi~(s) = sum_e sum_{i <= n_e} f'_e(i)``."""
    return float(sum(fprime_tables[e][1:k + 1].sum() for e, k in enumerate(loads) if k))


def _improves(cur: float, alt: float, factor_minus_1: float) -> bool:
    """``cur > (1 + factor_minus_1) alt`` beyond the move tolerance."""
    return cur - alt - factor_minus_1 * alt > MOVE_TOL * max(cur, 1e-300)


def check_approx_potential_step(game: CongestionGame, certificate, profile: StrategyProfile,
                                player: int, new_strategy: int, p: float) -> bool:
    """Whether the modified-cost potential strictly drops on this p-move."""
    ft = game.cost_tables(certificate)
    after = profile.with_choice(game, player, new_strategy)
    return modified_potential(game, after.loads, ft) < modified_potential(game, profile.loads, ft)


def check_pmove_dominance(game: CongestionGame, certificate, profile: StrategyProfile,
                          player: int, new_strategy: int, p: float, q: float) -> bool:
    """``p c_u(s') - c_u(s) >= q c'_u(s') - c'_u(s)`` up to rounding."""
    f = game.cost_tables()
    fp = game.cost_tables(certificate)
    cur = _cost_at(f, game.strategies[player][profile.choices[player]], profile.loads)
    alt = _deviation_cost(game, f, profile, player, new_strategy)
    cur_m = _cost_at(fp, game.strategies[player][profile.choices[player]], profile.loads)
    alt_m = _deviation_cost(game, fp, profile, player, new_strategy)
    lhs, rhs = p * alt - cur, q * alt_m - cur_m
    return lhs >= rhs - 1e-12 * max(abs(lhs), abs(rhs), p * alt, cur, q * alt_m, cur_m, 1e-300)


@dataclass(frozen=True)
class MoveRecord:
    phase: int
    player: int
    kind: str  # "p" (original costs) or "q" (modified costs)
    old: int
    new: int
    cost_before: float
    cost_after: float
    phi_tilde_before: float
    phi_tilde_after: float
    dominance_ok: bool | None


@dataclass(frozen=True)
class PhaseRecord:
    index: int
    moves: int
    postcondition_ok: bool


@dataclass
class RunResult:
    profile: StrategyProfile
    moves: list[MoveRecord]
    phases: list[PhaseRecord]
    certified_alpha: float
    worst_player: int
    params: AlgoParams
    blocks: BlockStructure
    initial: StrategyProfile

    @property
    def alpha_bound(self) -> float:
        return self.params.alpha_bound

    def to_json(self) -> dict[str, Any]:
        params = self.params.to_json()
        params["z_hat"] = self.blocks.z_hat
        return {
            "profile": self.profile.to_json(),
            "moves": len(self.moves),
            "phases": len(self.phases),
            "certified_alpha": self.certified_alpha,
            "params": params,
        }


def _phase_scan(game, f, fp, profile, first, second, t, p_minus_1):
    """First eligible mover: ``(player, kind, target)`` or ``None``."""
    for u in first:
        cur = _cost_at(f, game.strategies[u][profile.choices[u]], profile.loads)
        k, alt = _best_response(game, f, profile, u)
        if k != profile.choices[u] and _improves(cur, alt, p_minus_1):
            return u, "p", k
    for u in second:
        cur = _cost_at(fp, game.strategies[u][profile.choices[u]], profile.loads)
        k, alt = _best_response(game, fp, profile, u)
        if k != profile.choices[u] and _improves(cur, alt, t):
            return u, "q", k
    return None


def run(game: CongestionGame, certificate: SmoothnessCertificate, epsilon: float,
        c_override: float | None = None, move_cap: int = DEFAULT_MOVE_CAP,
        check_moves: bool = True) -> RunResult:
    """Run the block-phase dynamics and certify the final profile.

    Phases run for ``i = 1..max(zhat - 1, 1)``, skipping empty ``B_i``; with a
    single block the lone phase lets ``B_1`` make p-moves.  Within a phase the
    first eligible player (``B_i`` in index order, then ``B_{i+1}``) moves to its
    best response in the family it is judged by.
    """
    if certificate.objective != POTENTIAL or certificate.scope != "strong":
        raise ValueError("the dynamics need a strong certificate for the potential")
    N = game.n_players
    if N == 0:
        raise GameError("the dynamics need at least one player")
    cert = certificate.extended(N) if certificate.n_max < N else certificate
    params = derive_params(cert.lam, epsilon, N, game, c_override)
    blocks = partition_blocks(game, params)
    f = game.cost_tables()
    fp = game.cost_tables(cert)
    profile = optimistic_profile(game)
    initial = profile
    phi_t = modified_potential(game, profile.loads, fp)
    moves: list[MoveRecord] = []
    phases: list[PhaseRecord] = []
    p_minus_1 = params.p - 1.0
    for i in range(1, max(blocks.z_hat - 1, 1) + 1):
        first = blocks.members(i)
        if not first:
            continue
        second = blocks.members(i + 1)
        count = 0
        while True:
            step = _phase_scan(game, f, fp, profile, first, second, params.t, p_minus_1)
            if step is None:
                break
            u, kind, k = step
            table = f if kind == "p" else fp
            old = profile.choices[u]
            cost_before = _cost_at(table, game.strategies[u][old], profile.loads)
            dom = None
            if kind == "p" and check_moves:
                dom = check_pmove_dominance(game, cert, profile, u, k, params.p, params.q)
            profile = profile.with_choice(game, u, k)
            cost_after = _cost_at(table, game.strategies[u][k], profile.loads)
            phi_new = modified_potential(game, profile.loads, fp)
            moves.append(MoveRecord(i, u, kind, old, k, cost_before, cost_after, phi_t, phi_new, dom))
            phi_t = phi_new
            count += 1
            if len(moves) >= move_cap:
                partial = RunResult(profile, moves, phases, math.nan, -1, params, blocks, initial)
                raise MoveCapExceeded(f"move cap {move_cap} reached in phase {i}", partial)
        post = _phase_scan(game, f, fp, profile, first, second, params.t, p_minus_1) is None
        phases.append(PhaseRecord(i, count, post))
    chk = verify_alpha_equilibrium(game, profile, 1.0)
    return RunResult(profile, moves, phases, chk.worst_ratio, chk.worst_player, params, blocks, initial)


def move_count_bound(params: AlgoParams) -> float:
    """The ``4 lam Delta^3 N^{5c+5}`` per-phase bound times ``N`` phases (as a float)."""
    log_b = (math.log(4 * params.lam) + 3 * math.log(params.Delta)
             + (5 * params.c + 6) * math.log(params.N))
    return math.exp(min(log_b, 700.0))
