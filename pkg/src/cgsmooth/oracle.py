"""Exhaustive ground truth on small games.

Profiles are enumerated in chunks of mixed-radix indices; loads, player costs
and every unilateral deviation cost are computed with numpy over the whole
chunk.  Nothing here calls the LP code, so it serves as an independent check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .game import MOVE_TOL, CongestionGame, CostFunction, PlayerSubset, StrategyProfile

MAX_PROFILES = 10 ** 7
CHUNK = 1 << 16
MAX_GRID_POINTS = 2_000_000


class TooLarge(ValueError):
    """The instance exceeds an enumeration cap."""


@dataclass
class _Space:
    game: CongestionGame
    incidence: list[np.ndarray]  # per player: (n_strategies, n_resources) 0/1
    radices: np.ndarray

    @classmethod
    def of(cls, game: CongestionGame, cap: int = MAX_PROFILES) -> _Space:
        if game.n_profiles > cap:
            raise TooLarge(f"{game.n_profiles} profiles exceed the cap of {cap}")
        inc = []
        for strats in game.strategies:
            a = np.zeros((len(strats), game.n_resources), dtype=np.int64)
            for k, s in enumerate(strats):
                a[k, list(s)] = 1
            inc.append(a)
        return cls(game, inc, np.array([len(s) for s in game.strategies]))

    def chunks(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """``(choices, loads)`` blocks covering every profile in index order."""
        total = self.game.n_profiles
        for start in range(0, total, CHUNK):
            idx = np.arange(start, min(total, start + CHUNK))
            choices = np.stack(np.unravel_index(idx, self.radices), axis=1)
            loads = np.zeros((idx.size, self.game.n_resources), dtype=np.int64)
            for u, a in enumerate(self.incidence):
                loads += a[choices[:, u]]
            yield choices, loads

    def player_costs(self, T: np.ndarray, choices, loads) -> tuple[np.ndarray, np.ndarray]:
        """Current costs ``(P, N)`` and best deviation ratio ``(P, N)`` under tables ``T``."""
        P, N = choices.shape
        R = self.game.n_resources
        cols = np.arange(R)
        at_load = T[cols, loads]  # (P, R)
        cur = np.empty((P, N))
        worst = np.ones((P, N))
        for u, a in enumerate(self.incidence):
            mine = a[choices[:, u]]
            cur[:, u] = (mine * at_load).sum(1)
            for k in range(a.shape[0]):
                new_loads = loads - mine + a[k]
                alt = (a[k] * T[cols, new_loads]).sum(1)
                with np.errstate(divide="ignore", invalid="ignore"):
                    r = np.where(alt > 0, cur[:, u] / np.where(alt > 0, alt, 1.0),
                                 np.where(cur[:, u] > 0, np.inf, 1.0))
                r[choices[:, u] == k] = 1.0
                worst[:, u] = np.maximum(worst[:, u], r)
        return cur, worst


def _family_tables(game: CongestionGame, fprime=None) -> np.ndarray:
    tabs = game.cost_tables(fprime)
    N = game.n_players
    return np.stack([np.asarray(t[: N + 1], dtype=float) for t in tabs])


def _potential(T: np.ndarray, loads: np.ndarray) -> np.ndarray:
    C = np.cumsum(T, axis=1) - T[:, :1]  # C[e, k] = sum_{i=1..k} T[e, i]
    return C[np.arange(T.shape[0]), loads].sum(1)


def _social(T: np.ndarray, loads: np.ndarray) -> np.ndarray:
    return (loads * T[np.arange(T.shape[0]), loads]).sum(1)


def enumerate_equilibria(game: CongestionGame, alpha: float = 1.0, fprime=None,
                         cap: int = MAX_PROFILES) -> list[StrategyProfile]:
    """Every ``alpha``-approximate equilibrium under ``f`` (or ``fprime``)."""
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    sp = _Space.of(game, cap)
    T = _family_tables(game, fprime)
    out = []
    for choices, _loads in _scan(sp, T, alpha):
        out.extend(StrategyProfile.from_choices(game, c) for c in choices.tolist())
    return out


def _scan(sp: _Space, T: np.ndarray, alpha: float):
    for choices, loads in sp.chunks():
        _, worst = sp.player_costs(T, choices, loads)
        ok = np.all(worst <= alpha * (1 + MOVE_TOL), axis=1)
        if ok.any():
            yield choices[ok], loads[ok]


def exact_stretch(game: CongestionGame, alpha: float = 1.0, eq_fprime=None, pot_fprime=None,
                  cap: int = MAX_PROFILES) -> float:
    """``max_{alpha-eq s} phi(s) / min_s phi(s)``; equilibria under ``eq_fprime``, potential under ``pot_fprime``."""
    sp = _Space.of(game, cap)
    Teq = _family_tables(game, eq_fprime)
    Tpot = _family_tables(game, pot_fprime)
    best = min(float(_potential(Tpot, loads).min()) for _, loads in sp.chunks())
    worst = max(float(_potential(Tpot, loads).max()) for _, loads in _scan(sp, Teq, alpha))
    if best == 0.0:
        return 1.0 if worst == 0.0 else math.inf
    return worst / best


def exact_poa(game: CongestionGame, fprime=None, cap: int = MAX_PROFILES) -> float:
    """Worst equilibrium social cost over the optimum; equilibria under ``fprime`` if given,
    social cost always under the original costs."""
    sp = _Space.of(game, cap)
    Teq = _family_tables(game, fprime)
    T = _family_tables(game)
    opt = min(float(_social(T, loads).min()) for _, loads in sp.chunks())
    worst = max(float(_social(T, loads).max()) for _, loads in _scan(sp, Teq, 1.0))
    if opt == 0.0:
        return 1.0 if worst == 0.0 else math.inf
    return worst / opt


def optimum_social_cost(game: CongestionGame, cap: int = MAX_PROFILES) -> tuple[float, StrategyProfile]:
    sp = _Space.of(game, cap)
    T = _family_tables(game)
    best, arg = math.inf, None
    for choices, loads in sp.chunks():
        c = _social(T, loads)
        k = int(np.argmin(c))
        if c[k] < best:
            best, arg = float(c[k]), choices[k]
    return best, StrategyProfile.from_choices(game, arg.tolist())


@dataclass(frozen=True)
class StretchViolation:
    profile: tuple[int, ...]
    subset: tuple[int, ...]
    phi_s: float
    phi_min: float
    bound: float


def subset_stretch_violations(game: CongestionGame, fprime, q: float, theta: float,
                              cap: int = MAX_PROFILES) -> tuple[int, list[StretchViolation]]:
    """Check ``phi_F(s) <= theta phi_F(s*_F)`` for every ``q``-equilibrium ``s`` under ``fprime``.

    ``phi_F`` is the original-cost potential of the subgame of ``F`` with every
    other player frozen at ``s``; ``s*_F`` minimises it over the members'
    strategies.  Returns the number of ``(s, F)`` pairs checked and the violations.
    """
    sp = _Space.of(game, cap)
    Teq = _family_tables(game, fprime)
    T = _family_tables(game)
    C = np.cumsum(T, axis=1) - T[:, :1]
    rows = np.arange(game.n_resources)
    N = game.n_players
    checked, bad = 0, []
    subsets = [F for r in range(1, N + 1) for F in itertools.combinations(range(N), r)]
    for choices, loads in _scan(sp, Teq, q):
        for s_choice, s_load in zip(choices, loads):
            for F in subsets:
                members = list(F)
                outside = s_load - sum(sp.incidence[u][s_choice[u]] for u in members)
                phi_s = float((C[rows, s_load] - C[rows, outside]).sum())
                phi_min = math.inf
                for alt in itertools.product(*(range(sp.radices[u]) for u in members)):
                    ld = outside + sum(sp.incidence[u][k] for u, k in zip(members, alt))
                    phi_min = min(phi_min, float((C[rows, ld] - C[rows, outside]).sum()))
                checked += 1
                if phi_s > theta * phi_min * (1 + MOVE_TOL) + 1e-12:
                    bad.append(StretchViolation(tuple(int(x) for x in s_choice), F, phi_s, phi_min,
                                                theta * phi_min))
    return checked, bad


# ---------------------------------------------------------------------------
# brute-force lambda over a grid of modified tables


def _lambda_needed_phi(f: np.ndarray, fp: np.ndarray, N: int, load_cap: int) -> np.ndarray:
    """Smallest feasible lambda for each candidate row of ``fp`` (``inf`` if none)."""
    lam = np.zeros(fp.shape[0])
    for n in range(N + 1):
        for z in range(N + 1 - n):
            S_n = f[z + 1: z + n + 1].sum()
            fp_nz = fp[:, n + z] if n + z > 0 else 0.0
            for m in range(N + 1):
                if m + z > load_cap:
                    continue
                S_m = f[z + 1: z + m + 1].sum()
                need = m * fp[:, n + z + 1] - n * fp_nz + S_n
                if S_m > 0:
                    lam = np.maximum(lam, need / S_m)
                else:
                    lam = np.where(need > 1e-12 * max(S_n, 1.0), np.inf, lam)
    return lam


def _lambda_needed_sc(f: np.ndarray, fp: np.ndarray, N: int) -> np.ndarray:
    h = np.arange(f.size) * f
    lam = np.zeros(fp.shape[0])
    for n in range(N + 1):
        fp_n = fp[:, n] if n > 0 else 0.0
        for m in range(N + 1):
            need = m * fp[:, n + 1] - n * fp_n + h[n]
            if h[m] > 0:
                lam = np.maximum(lam, need / h[m])
            else:
                lam = np.where(need > 1e-12 * max(h[n], 1.0), np.inf, lam)
    return lam


@dataclass(frozen=True)
class BruteForceResult:
    lam: float
    fprime: np.ndarray  # f'(0..N+1)
    step: float  # lambda change caused by one final grid step


def bruteforce_lambda(f: CostFunction, N: int, family: str, grid: int = 21, zooms: int = 8,
                      span: float = 4.0) -> BruteForceResult:
    """Minimise lambda over a zooming grid of tables ``f'(1..N+1)``.

    The first grid spans ``f'(k) in [f(k), span f(k)]``; each zoom recentres on
    the best point and halves the window.  ``step`` bounds how much lambda can
    change when every entry moves by one final grid spacing, so the LP optimum
    is expected in ``[lam - step, lam]``.
    """
    if N > 4:
        raise TooLarge("brute force is limited to N <= 4")
    if grid ** (N + 1) > MAX_GRID_POINTS:
        raise TooLarge(f"{grid}^{N + 1} grid points exceed {MAX_GRID_POINTS}")
    cap = 2 * N if f.n_max is None else f.n_max
    ftab = f.table_upto(max(cap, N + 1)).copy()
    ftab[0] = 0.0
    base = ftab[1: N + 2]
    lo = base.copy()
    hi = span * np.maximum(base, 1e-12)
    axis = np.linspace(0.0, 1.0, grid)

    def evaluate(lo, hi):
        pts = np.stack(np.meshgrid(*[lo[k] + axis * (hi[k] - lo[k]) for k in range(N + 1)],
                                   indexing="ij"), -1).reshape(-1, N + 1)
        fp = np.concatenate([np.zeros((pts.shape[0], 1)), pts], axis=1)
        if family == "potential":
            lam = _lambda_needed_phi(ftab, fp, N, cap)
        elif family == "social_cost":
            lam = _lambda_needed_sc(ftab, fp, N)
        else:
            raise ValueError(f"unknown family {family!r}")
        k = int(np.argmin(lam))
        return float(lam[k]), fp[k]

    best, best_fp = evaluate(lo, hi)
    for _ in range(zooms):
        width = (hi - lo) / 2
        centre = best_fp[1:]
        lo = np.maximum(centre - width / 2, 0.0)
        hi = lo + width
        lam, fp = evaluate(lo, hi)
        if lam <= best:
            best, best_fp = lam, fp
    spacing = (hi - lo) / (grid - 1)
    # worst-case effect of shifting every entry by one spacing
    if family == "potential":
        step = 0.0
        for z in range(N + 1):
            for m in range(1, N + 1):
                if m + z > cap:
                    continue
                S_m = ftab[z + 1: z + m + 1].sum()
                if S_m <= 0:
                    continue
                for n in range(N + 1 - z):
                    d = m * spacing[n + z] + (n * spacing[n + z - 1] if n + z > 0 else 0.0)
                    step = max(step, d / S_m)
    else:
        h = np.arange(ftab.size) * ftab
        step = max((m * spacing[n] + (n * spacing[n - 1] if n > 0 else 0.0)) / h[m]
                   for n in range(N + 1) for m in range(1, N + 1) if h[m] > 0)
    return BruteForceResult(best, best_fp, float(step))
