"""The dual of the social-cost LP and the scheduling instances built from it.

Dual variables ``y[n, m] >= 0`` for ``n, m in [0, N]``:

    max  sum h(n) y[n, m]
    s.t. sum h(m) y[n, m] <= 1
         sum_m n y[n, m] - sum_m m y[n-1, m] <= 0      for n = 1..N

(the ``n = 0`` flow row only involves ``y[-1, .] = 0`` and is vacuous).  A
feasible ``y`` becomes an instance of selfish scheduling on identical
machines: pool ``R[n, m]`` holds ``Y[n, m]`` machines, each carrying ``n``
players in the equilibrium ``s*`` and at most ``m`` in the reference state ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
import scipy.sparse as sp

from .game import CongestionGame, CostFunction, StrategyProfile
from .lp import LinearProgram, LPError, solve
from .smoothness import ObjectiveFamily, SOCIAL_COST, solve_lp_sc, solve_lp_sc_lazy

PRUNE = 1e-9
EAGER_LIMIT = 150
MAX_MACHINES = 10 ** 7


class LowerBoundError(ValueError):
    pass


def h_social(f, N: int) -> np.ndarray:
    """``h(n) = n f(n)`` over ``0..N``."""
    return ObjectiveFamily(SOCIAL_COST).h(f, N)


def _check_h(h) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.ndim != 1 or h.size < 2:
        raise LowerBoundError("h must be a table over loads 0..N with N >= 1")
    if h[0] != 0 or np.any(np.diff(h) < 0):
        raise LowerBoundError("h must satisfy h(0) = 0 and be non-decreasing")
    return h


def build_lpd(h, columns=None) -> LinearProgram:
    """The dual LP for ``h`` over ``0..N``; ``columns`` restricts the support to given ``(n, m)``.

    Variables are ``w = y * max(h(n), h(m), 1)`` so that the normalisation
    row has entries in ``[0, 1]`` for any degree.
    """
    return _lpd(h, columns)[0]


def _lpd(h, columns) -> tuple[LinearProgram, np.ndarray, np.ndarray]:
    h = _check_h(h)
    N = h.size - 1
    if columns is None:
        nn, mm = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
        cols = np.stack([nn.ravel(), mm.ravel()], 1)
    else:
        cols = np.asarray(columns, dtype=int).reshape(-1, 2)
    n, m = cols[:, 0], cols[:, 1]
    nv = len(cols)
    scale = np.maximum(np.maximum(h[n], h[m]), 1.0)
    lp = LinearProgram(nv, h[n] / scale, "max", [f"w{a}_{b}" for a, b in cols.tolist()])
    lp.add_rows(sp.csr_matrix((h[m] / scale).reshape(1, -1)), "<=", [1.0])
    # flow row k (k = 1..N): k y[k, .] - m y[k-1, .]
    r1 = n - 1
    v1 = n / scale
    r2 = n
    v2 = -m / scale
    rows = np.concatenate([r1, r2])
    vals = np.concatenate([v1, v2])
    colidx = np.concatenate([np.arange(nv), np.arange(nv)])
    keep = (rows >= 0) & (rows < N) & (vals != 0)
    A = sp.csr_matrix((vals[keep], (rows[keep], colidx[keep])), shape=(N, nv))
    lp.add_rows(A, "<=", np.zeros(N))
    return lp, cols, scale


@dataclass(frozen=True)
class DualSolution:
    y: np.ndarray  # (N+1, N+1)
    h: np.ndarray
    objective: float

    @property
    def N(self) -> int:
        return self.h.size - 1

    def normalisation(self) -> float:
        return float((self.y * self.h[None, :]).sum())

    def flow_slack(self) -> np.ndarray:
        """``sum_m m y[n-1, m] - sum_m n y[n, m]`` for ``n = 1..N`` (all >= 0 when feasible)."""
        mcol = np.arange(self.N + 1)
        return (self.y[:-1] @ mcol) - np.arange(1, self.N + 1) * self.y[1:].sum(1)

    def is_feasible(self, tol: float = 1e-9) -> bool:
        return bool(np.all(self.y >= -tol) and self.normalisation() <= 1 + tol
                    and np.all(self.flow_slack() >= -tol * max(1.0, float(self.y.sum()) * self.N)))

    def support(self) -> list[tuple[int, int, float]]:
        idx = np.argwhere(self.y > 0)
        return [(int(a), int(b), float(self.y[a, b])) for a, b in idx]

    def to_json(self) -> dict[str, Any]:
        return {"N": self.N, "objective": self.objective, "h": self.h.tolist(),
                "support": [[a, b, v] for a, b, v in self.support()]}


def solve_lpd(h, method: str = "auto") -> DualSolution:
    """Optimal dual solution.

    ``method="eager"`` materialises all ``(N+1)^2`` columns.  ``"columns"``
    first solves the primal by row generation and restricts the dual to the
    primal's active rows; the restricted optimum equals the full one because
    the primal with those rows alone is already optimal.  This needs ``h``
    given as a cost function (so the primal can be built).
    """
    if method not in ("auto", "eager", "columns"):
        raise LowerBoundError(f"unknown method {method!r}")
    f = None
    if isinstance(h, tuple):
        f, N = h
        h = h_social(f, N)
    h = _check_h(h)
    N = h.size - 1
    if method == "auto":
        method = "eager" if N <= EAGER_LIMIT or f is None else "columns"
    columns = None
    if method == "columns":
        if f is None:
            raise LowerBoundError("column mode needs (cost_function, N)")
        columns = np.array(solve_lp_sc_lazy(f, N).active)
    lp, cols, scale = _lpd(h, columns)
    res = solve(lp)
    if not res.optimal:
        raise LPError(f"dual LP failed: {res.status.value} ({res.message})")
    y = np.zeros((N + 1, N + 1))
    x = np.where(res.x > PRUNE, res.x, 0.0) / scale
    y[cols[:, 0], cols[:, 1]] = x
    return DualSolution(y, h, float((h[:, None] * y).sum()))


def lp_duality_check(primal_opt: float, dual_opt: float, rel: float = 1e-5) -> bool:
    """Strong duality within ``rel`` relative tolerance."""
    return abs(primal_opt - dual_opt) <= rel * max(abs(primal_opt), abs(dual_opt), 1e-300)


def primal_dual_pair(f: CostFunction, N: int) -> tuple[float, float]:
    """``(LP_SC(N) optimum, dual optimum)`` for the same ``h``."""
    primal = solve_lp_sc(f, N)[0] if N <= EAGER_LIMIT else solve_lp_sc_lazy(f, N).lam
    dual = solve_lpd((f, N)).objective
    return primal, dual


# ---------------------------------------------------------------------------
# scheduling instances


@dataclass(frozen=True)
class SchedulingInstance:
    """Machines grouped in pools ``R[n, m]`` and players with two singleton strategies.

    ``pool_of[r] = (n, m)`` for machine ``r``; player ``u`` belongs to group
    ``N_{group[u]}`` and has equilibrium machine ``eq[u]`` and reference
    machine ``opt[u]``.
    """

    M: int
    counts: dict  # (n, m) -> number of machines
    pool_of: tuple[tuple[int, int], ...]
    group: np.ndarray
    eq: np.ndarray
    opt: np.ndarray
    epsilon: float
    dual_objective: float

    @property
    def n_machines(self) -> int:
        return len(self.pool_of)

    @property
    def n_players(self) -> int:
        return int(self.group.size)

    def loads(self, which: str) -> np.ndarray:
        target = self.eq if which == "eq" else self.opt
        return np.bincount(target, minlength=self.n_machines)

    def to_game(self, cost: CostFunction) -> CongestionGame:
        strategies = [[[int(a)], [int(b)]] for a, b in zip(self.eq, self.opt)]
        return CongestionGame.build([cost] * self.n_machines, strategies)

    def to_json(self, cost: CostFunction) -> dict[str, Any]:
        data = self.to_game(cost).to_json()
        data["equilibrium_profile"] = {"choices": [0] * self.n_players}
        data["optimal_profile"] = {"choices": [1] * self.n_players}
        return data


def _round_counts(dual: DualSolution, M: int) -> dict:
    """Integer machine counts ``floor(y M)`` repaired so every flow row holds."""
    Y = np.floor(dual.y * M + 1e-9).astype(np.int64)
    N = dual.N
    mcol = np.arange(N + 1)
    for n in range(1, N + 1):
        capacity = int((Y[n - 1] * mcol).sum())
        need = n * int(Y[n].sum())
        # drop level-n machines with the smallest m until the flow row holds
        for m in range(N + 1):
            if need <= capacity:
                break
            while Y[n, m] > 0 and need > capacity:
                Y[n, m] -= 1
                need -= n
    return {(int(a), int(b)): int(Y[a, b]) for a, b in np.argwhere(Y > 0)}


def construct_instance(dual: DualSolution, epsilon: float, max_machines: int = MAX_MACHINES,
                       M: int | None = None) -> SchedulingInstance:
    """Scheduling instance whose equilibrium/reference cost ratio is at least ``objective - epsilon``.

    The scale ``M`` (machines per unit of ``y``) is the smallest power of ten
    for which rounding down plus flow repair keeps the ratio within
    ``epsilon`` of the dual objective, unless ``M`` is given.
    """
    if not epsilon > 0:
        raise LowerBoundError("epsilon must be positive")
    if not dual.is_feasible():
        raise LowerBoundError("dual solution is not feasible")
    h = dual.h
    if M is None:
        if dual.objective == 0:
            M = 1
        else:
            M = 10
            while True:
                counts = _round_counts(dual, M)
                eq_cost = sum(h[n] * c for (n, m), c in counts.items())
                if eq_cost >= (dual.objective - epsilon) * M:
                    break
                M *= 10
                if M * float(dual.y.sum()) > max_machines:
                    raise LowerBoundError(
                        f"more than {max_machines} machines needed; use a larger epsilon")
    counts = _round_counts(dual, M)
    pool_of: list[tuple[int, int]] = []
    first: dict = {}
    for key in sorted(counts):
        first[key] = len(pool_of)
        pool_of.extend([key] * counts[key])
    N = dual.N
    group, eq, opt = [], [], []
    for n in range(1, N + 1):
        level = [k for k in sorted(counts) if k[0] == n]
        below = [k for k in sorted(counts) if k[0] == n - 1]
        slots = [first[k] + i for k in below for i in range(counts[k]) for _ in range(k[1])]
        players = [first[k] + i for k in level for i in range(counts[k]) for _ in range(n)]
        if len(players) > len(slots):
            raise LowerBoundError(f"flow row {n} violated after rounding")
        group.extend([n] * len(players))
        eq.extend(players)
        opt.extend(slots[: len(players)])
    inst = SchedulingInstance(M, counts, tuple(pool_of), np.array(group, dtype=int),
                              np.array(eq, dtype=int), np.array(opt, dtype=int), float(epsilon),
                              dual.objective)
    _check_structure(inst)
    return inst


def _check_structure(inst: SchedulingInstance) -> None:
    eq_load = inst.loads("eq")
    opt_load = inst.loads("opt")
    for r, (n, m) in enumerate(inst.pool_of):
        if eq_load[r] != n:
            raise LowerBoundError(f"machine {r} in R[{n},{m}] carries {eq_load[r]} equilibrium players")
        if opt_load[r] > m:
            raise LowerBoundError(f"machine {r} in R[{n},{m}] carries {opt_load[r]} > {m} reference players")
    pools = np.array(inst.pool_of, dtype=int).reshape(-1, 2)
    if inst.n_players and (np.any(pools[inst.eq, 0] != inst.group)
                           or np.any(pools[inst.opt, 0] != inst.group - 1)):
        raise LowerBoundError("a player's machines are in the wrong pools")


@dataclass(frozen=True)
class GapReport:
    eq_is_pne: bool
    ratio: float
    eq_cost: float
    opt_cost: float
    degenerate: bool


def verify_gap(inst: SchedulingInstance, h, fprime=None) -> GapReport:
    """Check ``s*`` is an equilibrium and return ``sum h(load s*) / sum h(load s)``.

    The equilibrium test is structural: moving to the reference machine gives
    a load at least the current one, so no non-decreasing machine cost can make
    it profitable.  With ``fprime`` (a table over loads) the test is also done
    numerically under those costs.
    """
    _check_structure(inst)
    h = np.asarray(h, dtype=float)
    eq_load = inst.loads("eq")
    opt_load = inst.loads("opt")
    pne = bool(np.all(eq_load[inst.opt] + 1 >= eq_load[inst.eq]))
    if fprime is not None:
        fp = np.asarray(fprime, dtype=float)
        pne = pne and bool(np.all(fp[eq_load[inst.eq]] <= fp[eq_load[inst.opt] + 1] * (1 + 1e-12)))
    eq_cost = float(h[eq_load].sum())
    opt_cost = float(h[opt_load].sum())
    if inst.n_players == 0 or opt_cost == 0:
        return GapReport(pne, math.nan, eq_cost, opt_cost, True)
    return GapReport(pne, eq_cost / opt_cost, eq_cost, opt_cost, False)
