"""Smoothness constraints, the LPs that optimise modified costs, and certificates.

Two objective families are supported.  For the *potential* family the
constraint (with subgame offset ``z``) is

    lam * S(z, m) - m f'(n+z+1) + n f'(n+z) >= S(z, n),   S(z, k) = sum_{i=z+1}^{z+k} f(i)

and for the *social cost* family, with ``h(n) = n f(n)``,

    lam * h(m) - m f'(n+1) + n f'(n) >= h(n).

For fixed ``(n, z)`` both slacks are discrete-convex in ``m`` whenever ``f``
(resp. the increments of ``h``) are non-decreasing, so the most violated
``m`` is found exactly by a sorted search over increments.  The separation
oracles and the fast verification mode rely on this.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Callable

import numpy as np
import scipy.sparse as sp

from .game import CongestionGame, CostFunction, GameError, LoadOutOfRange
from .lp import CutBatch, LinearProgram, LPError, LPResult, Status, solve, solve_lazy

log = logging.getLogger(__name__)

POTENTIAL = "potential"
SOCIAL_COST = "social_cost"
FAMILIES = (POTENTIAL, SOCIAL_COST)
K_POTENTIAL = 150
K_SOCIAL = 1154
MAX_DEGREE = 5
VERIFY_TOL = 1e-8
CUT_TOL = 1e-9


class SmoothnessError(ValueError):
    pass


def _check_family(family: str) -> str:
    if family not in FAMILIES:
        raise SmoothnessError(f"objective family must be one of {FAMILIES}, got {family!r}")
    return family


def _check_degree(d: int) -> int:
    if not (isinstance(d, (int, np.integer)) and 1 <= d <= MAX_DEGREE):
        raise SmoothnessError(f"degree must be an integer in [1, {MAX_DEGREE}], got {d!r}")
    return int(d)


def _as_table(f, upto: int) -> np.ndarray:
    """``f`` as an array over loads ``0..upto`` (entry 0 is ignored by every formula)."""
    if isinstance(f, CostFunction):
        if f.n_max is not None and upto > f.n_max:
            raise LoadOutOfRange(f"cost table covers loads up to {f.n_max}, {upto} requested")
        return f.table_upto(upto)
    if callable(f):
        return np.asarray(f(np.arange(upto + 1)), dtype=float)
    t = np.asarray(f, dtype=float)
    if t.shape[0] < upto + 1:
        raise LoadOutOfRange(f"table covers loads up to {t.shape[0] - 1}, {upto} requested")
    return t[: upto + 1]


@dataclass(frozen=True)
class ObjectiveFamily:
    """The objective ``h`` a certificate is measured against.

    ``potential``: ``h(n) = f(1) + ... + f(n)`` (optionally offset by ``z``);
    ``social_cost``: ``h(n) = n f(n)``.
    """

    tag: str

    def __post_init__(self) -> None:
        _check_family(self.tag)

    def h(self, f, upto: int, z: int = 0) -> np.ndarray:
        """``h`` over ``0..upto``; the potential uses ``S(z, k)``."""
        if self.tag == SOCIAL_COST:
            if z:
                raise SmoothnessError("the social-cost objective has no subgame offset")
            t = _as_table(f, upto)
            t = t.copy()
            t[0] = 0.0
            return np.arange(upto + 1) * t
        t = _as_table(f, upto + z).copy()
        t[0] = 0.0
        P = np.cumsum(t)
        return P[z: z + upto + 1] - P[z]

    @property
    def scope(self) -> str:
        return "strong" if self.tag == POTENTIAL else "plain"


# ---------------------------------------------------------------------------
# constraint evaluation


def eval_sc_constraint(h, fprime, n, m, lam):
    """Slack ``lam h(m) - m f'(n+1) + n f'(n) - h(n)``; vectorised over ``n`` and ``m``.

    ``h`` and ``fprime`` are arrays indexed by load.
    """
    h = np.asarray(h, dtype=float)
    fp = np.asarray(fprime, dtype=float)
    n = np.asarray(n)
    m = np.asarray(m)
    if np.any(n < 0) or np.any(m < 0):
        raise LoadOutOfRange("loads must be non-negative")
    if np.any(n + 1 >= fp.shape[0]) or np.any(m >= h.shape[0]) or np.any(n >= h.shape[0]):
        raise LoadOutOfRange("load outside the tabulated range")
    fp_n = np.where(n > 0, fp[n], 0.0)
    out = lam * h[m] - m * fp[n + 1] + n * fp_n - h[n]
    return float(out) if out.ndim == 0 else out


def eval_phi_constraint(f, fprime, n, z, m, lam):
    """Slack of the strong-smoothness constraint for the potential; vectorised.

    ``f`` and ``fprime`` are arrays indexed by load (``f`` must reach ``m+z`` and
    ``n+z``; ``fprime`` must reach ``n+z+1``).
    """
    f = np.asarray(f, dtype=float).copy()
    fp = np.asarray(fprime, dtype=float)
    n, z, m = np.asarray(n), np.asarray(z), np.asarray(m)
    if np.any(n < 0) or np.any(z < 0) or np.any(m < 0):
        raise LoadOutOfRange("loads must be non-negative")
    if np.any(n + z + 1 >= fp.shape[0]) or np.any(m + z >= f.shape[0]) or np.any(n + z >= f.shape[0]):
        raise LoadOutOfRange("load outside the tabulated range")
    f[0] = 0.0
    P = np.cumsum(f)
    fp_nz = np.where(n + z > 0, fp[n + z], 0.0)
    out = lam * (P[m + z] - P[z]) - m * fp[n + z + 1] + n * fp_nz - (P[n + z] - P[z])
    return float(out) if out.ndim == 0 else out


def _term_scale(*terms) -> np.ndarray:
    s = np.zeros(np.broadcast(*terms).shape)
    for t in terms:
        s = s + np.abs(t)
    return s


# ---------------------------------------------------------------------------
# finite LPs


def _pin(lp: LinearProgram, fixed_fprime, N: int) -> None:
    if fixed_fprime is None:
        return
    v = np.asarray(fixed_fprime, dtype=float)
    if v.shape != (N + 1,):
        raise SmoothnessError(f"fixed_fprime must list f'(1..{N + 1})")
    lp.lower[: N + 1] = v
    lp.upper[: N + 1] = v


def _monotone_top(lp: LinearProgram, f, N: int) -> None:
    """``f'(N+1) >= max(f'(N), f(N+1))``.

    With ``N`` players a deviator onto a full resource pays ``f'(N)``; the
    floor ``f(N+1)`` keeps the sandwich ``f <= f'`` on the whole table.
    """
    row = np.zeros(N + 2)
    row[N], row[N - 1] = 1.0, -1.0
    lp.add_constraint(row, ">=", 0.0)
    try:
        floor = float(_as_table(f, N + 1)[N + 1])
    except LoadOutOfRange:  # f is not defined at N + 1
        return
    top = np.zeros(N + 2)
    top[N] = 1.0
    lp.add_constraint(top, ">=", floor)


def build_lp_phi(f, N: int, load_cap: int | None = None, fixed_fprime=None,
                 monotone_top: bool = False) -> LinearProgram:
    """LP over ``f'(1..N+1), lam`` with one row per ``(n, z, m)``.

    Rows cover ``n, z >= 0`` with ``n + z <= N`` and ``0 <= m <= N``; rows with
    ``m + z > load_cap`` are dropped (the default cap is the cost table's range,
    unbounded for polynomials).  Minimises ``lam``.  ``f'(N+1)`` only enters
    with a non-positive coefficient, so it is free to drop to 0 unless
    ``monotone_top`` adds ``f'(N+1) >= f'(N)``.
    """
    if N < 1:
        raise SmoothnessError("N must be at least 1")
    if load_cap is None:
        load_cap = f.n_max if isinstance(f, CostFunction) and f.n_max is not None else 2 * N
    load_cap = min(load_cap, 2 * N)
    ftab = _as_table(f, max(load_cap, N)).copy()
    ftab[0] = 0.0
    P = np.cumsum(ftab)
    nn, zz, mm = np.meshgrid(np.arange(N + 1), np.arange(N + 1), np.arange(N + 1), indexing="ij")
    keep = (nn + zz <= N) & (mm + zz <= load_cap)
    n, z, m = nn[keep], zz[keep], mm[keep]
    nv = N + 2
    lam_col = N + 1
    r = np.arange(n.size)
    # f'(k) lives in column k-1
    rows = [r, r]
    cols = [np.full(n.size, lam_col), n + z]
    vals = [P[m + z] - P[z], -m.astype(float)]
    has = (n > 0)
    rows.append(r[has])
    cols.append((n + z - 1)[has])
    vals.append(n[has].astype(float))
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n.size, nv))
    obj = np.zeros(nv)
    obj[lam_col] = 1.0
    names = [f"fp{k}" for k in range(1, N + 2)] + ["lambda"]
    lp = LinearProgram(nv, obj, "min", names)
    lp.add_rows(A, ">=", P[n + z] - P[z])
    _pin(lp, fixed_fprime, N)
    if monotone_top:
        _monotone_top(lp, f, N)
    return lp


def build_lp_sc(f, N: int, fixed_fprime=None, monotone_top: bool = False) -> LinearProgram:
    """LP over ``f'(1..N+1), lam`` with rows ``lam h(m) - m f'(n+1) + n f'(n) >= h(n)``, ``n, m <= N``."""
    if N < 1:
        raise SmoothnessError("N must be at least 1")
    h = ObjectiveFamily(SOCIAL_COST).h(f, N)
    nn, mm = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
    n, m = nn.ravel(), mm.ravel()
    nv = N + 2
    lam_col = N + 1
    r = np.arange(n.size)
    rows = [r, r]
    cols = [np.full(n.size, lam_col), n]
    vals = [h[m], -m.astype(float)]
    has = n > 0
    rows.append(r[has])
    cols.append(n[has] - 1)
    vals.append(n[has].astype(float))
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n.size, nv))
    obj = np.zeros(nv)
    obj[lam_col] = 1.0
    names = [f"fp{k}" for k in range(1, N + 2)] + ["lambda"]
    lp = LinearProgram(nv, obj, "min", names)
    lp.add_rows(A, ">=", h[n])
    _pin(lp, fixed_fprime, N)
    if monotone_top:
        _monotone_top(lp, f, N)
    return lp


def _finite_result(res: LPResult, N: int) -> tuple[float, np.ndarray]:
    if not res.optimal:
        raise LPError(f"LP did not solve to optimality: {res.status.value} ({res.message})")
    fp = np.concatenate([[0.0], res.x[: N + 1]])
    return float(res.x[N + 1]), fp


def solve_lp_phi(f, N: int, load_cap: int | None = None, backend: str = "highs",
                 monotone_top: bool = False):
    """Optimal ``(lam, f'(0..N+1))`` of :func:`build_lp_phi`."""
    return _finite_result(solve(build_lp_phi(f, N, load_cap, monotone_top=monotone_top), backend), N)


def solve_lp_sc(f, N: int, backend: str = "highs", monotone_top: bool = False):
    """Optimal ``(lam, f'(0..N+1))`` of :func:`build_lp_sc`."""
    return _finite_result(solve(build_lp_sc(f, N, monotone_top=monotone_top), backend), N)


@dataclass(frozen=True)
class LazySolution:
    lam: float
    fprime: np.ndarray  # f'(0..N+1)
    active: tuple[tuple[int, int], ...]  # (n, m) rows present at the optimum
    rounds: int


def solve_lp_sc_lazy(f, N: int, max_rounds: int = 500) -> LazySolution:
    """:func:`build_lp_sc` solved by row generation (for large ``N``).

    Requires ``h(n) = n f(n)`` to have non-decreasing increments (true for
    polynomials with non-negative coefficients), which makes the per-``n``
    minimiser over ``m`` exact.
    """
    h = ObjectiveFamily(SOCIAL_COST).h(f, N)
    dh = np.diff(h)
    if np.any(np.diff(dh) < -1e-12 * np.maximum(np.abs(dh[1:]), 1.0)):
        raise SmoothnessError("lazy LP_SC needs h with non-decreasing increments")
    scale = np.maximum(h, 1.0)
    # columns are f'(k) / f(k), which keeps high degrees well conditioned
    fk = h[1:] / np.arange(1, N + 1)
    col = np.concatenate([[1.0], fk, [fk[-1]]])
    col = np.where(col > 0, col, 1.0)
    nv = N + 2
    obj = np.zeros(nv)
    obj[N + 1] = 1.0
    lp = LinearProgram(nv, obj, "min", [f"fp{k}" for k in range(1, N + 2)] + ["lambda"])
    active: set = set()

    def rows(keys):
        n, m = keys[:, 0], keys[:, 1]
        s = 1.0 / np.maximum(scale[n], scale[m])
        r = np.arange(len(keys))
        has = n > 0
        A = sp.csr_matrix((np.concatenate([h[m] * s, -m * col[n + 1] * s, (n * col[n] * s)[has]]),
                           (np.concatenate([r, r, r[has]]),
                            np.concatenate([np.full(len(keys), N + 1), n, n[has] - 1]))),
                          shape=(len(keys), nv))
        return A, h[n] * s

    def add(keys):
        keys = [k for k in map(tuple, keys.tolist()) if k not in active]
        if not keys:
            return None
        active.update(keys)
        A, b = rows(np.array(keys))
        return CutBatch(A, ">=", b)

    n_all = np.arange(N + 1)
    seed = np.concatenate([np.stack([n_all, np.zeros_like(n_all)], 1),
                           np.stack([n_all, np.minimum(n_all + 1, N)], 1),
                           np.stack([n_all, n_all], 1)])
    cut = add(np.unique(seed, axis=0))
    lp.add_rows(cut.rows, ">=", cut.rhs)

    def oracle(x):
        lam = x[N + 1]
        fp = np.concatenate([[0.0], x[: N + 1] * col[1:]])
        t = fp[n_all + 1]
        m0 = _sc_minimiser(lam * dh, t, N)
        best_s, best_m = np.full(N + 1, np.inf), np.zeros(N + 1, dtype=int)
        fp_n = np.where(n_all > 0, fp[n_all], 0.0)
        for cand in (m0 - 1, m0, m0 + 1):
            m = np.clip(cand, 0, N)
            sl = (lam * h[m] - m * t + n_all * fp_n - h[n_all]) / np.maximum(scale[n_all], scale[m])
            better = sl < best_s
            best_s[better], best_m[better] = sl[better], m[better]
        bad = np.nonzero(best_s < -CUT_TOL)[0]
        if bad.size == 0:
            return None
        return add(np.stack([bad, best_m[bad]], 1))

    res = solve_lazy(lp, oracle, max_rounds=max_rounds)
    if res.optimal:
        res.x = np.concatenate([res.x[: N + 1] * col[1:], res.x[N + 1:]])
    lam, fp = _finite_result(res, N)
    return LazySolution(lam, fp, tuple(sorted(active)), res.rounds)


# ---------------------------------------------------------------------------
# per-block minimisation over m


def _phi_minimiser(lam_f: np.ndarray, targets: np.ndarray, z: np.ndarray, m_max) -> np.ndarray:
    """argmin over ``m`` of the potential slack, exact when ``f`` is non-decreasing.

    ``lam_f[i] = lam * f(i)`` (non-decreasing), ``targets = f'(n+z+1)``.
    The slack increment from ``m`` to ``m+1`` is ``lam f(m+z+1) - target``.
    """
    j = np.searchsorted(lam_f[1:], targets, side="left") + 1  # first i >= 1 with lam f(i) >= t
    return np.clip(j - z - 1, 0, m_max)


def _sc_minimiser(lam_dh: np.ndarray, targets: np.ndarray, m_max) -> np.ndarray:
    """argmin over ``m`` of ``lam h(m) - m t``, exact when ``h`` has non-decreasing increments.

    ``lam_dh[k] = lam (h(k+1) - h(k))``.
    """
    j = np.searchsorted(lam_dh, targets, side="left")
    return np.clip(j, 0, m_max)


# ---------------------------------------------------------------------------
# truncated LPs for monomial costs f(x) = x^d


def tail_nu(lam: float, d: int, family: str) -> float:
    """Tail coefficient ``nu`` with ``f'(n) = nu n^d`` beyond the truncation point."""
    _check_family(family)
    if family == POTENTIAL:
        return lam ** (1.0 / (d + 1))
    return ((d + 1) * lam) ** (1.0 / (d + 1))


def _m_cutoff(n_plus: int, d: int, family: str) -> int:
    """Largest ``m`` that needs checking for loads up to ``n_plus - 1``."""
    return n_plus ** 2 * (d + 1) if family == POTENTIAL else n_plus ** 2


@dataclass
class TruncatedLP:
    """``LP^K`` for ``f(x) = x^d`` with ``f'(K)`` pinned to ``nu K^d``.

    Variables are ``g(k) = f'(k)/k^d`` for ``k = 1..K`` plus ``lam``; rows are
    divided by ``max(n+z+1, m+z)^(d+1)``.  Both rescalings keep HiGHS well
    conditioned at ``d = 5`` where raw table entries span 20 orders of magnitude.
    The active row set survives across :meth:`solve_at` calls.
    """

    d: int
    family: str
    K: int
    lp: LinearProgram = field(init=False, repr=False)
    active: set = field(init=False, repr=False, default_factory=set)

    def __post_init__(self) -> None:
        _check_degree(self.d)
        _check_family(self.family)
        if self.K < 2:
            raise SmoothnessError("K must be at least 2")
        d, K = self.d, self.K
        self.m_max = _m_cutoff(K + 1, d, self.family)
        self.powd = np.arange(K + 2, dtype=float) ** d
        if self.family == POTENTIAL:
            top = self.m_max + K + 2
            f = np.arange(top, dtype=float) ** d
            self.f = f
            self.P = np.cumsum(f)
            pairs = [(n, s - n) for s in range(K) for n in range(s + 1)]
            self.n_blk = np.array([p[0] for p in pairs])
            self.z_blk = np.array([p[1] for p in pairs])
        else:
            self.n_blk = np.arange(K)
            self.z_blk = np.zeros(K, dtype=int)
            mm = np.arange(self.m_max + 2, dtype=float)
            self.h = mm ** (d + 1)
            self.dh = np.diff(self.h)
        obj = np.zeros(K + 1)
        obj[K] = 1.0
        names = [f"g{k}" for k in range(1, K + 1)] + ["lambda"]
        self.lp = LinearProgram(K + 1, obj, "min", names)
        n, z = self.n_blk, self.z_blk
        seed = np.concatenate([np.stack([n, z, np.zeros_like(n)], 1),
                               np.stack([n, z, np.ones_like(n)], 1),
                               np.stack([n, z, np.maximum(n, 1)], 1)])
        self._add(seed)

    def _S(self, z, k):
        return self.P[z + k] - self.P[z]

    def rows(self, keys: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
        """Scaled ``>=`` rows for index triples ``(n, z, m)``."""
        d, K = self.d, self.K
        n, z, m = keys[:, 0], keys[:, 1], keys[:, 2]
        s = 1.0 / np.maximum(n + z + 1, m + z).astype(float) ** (d + 1)
        if self.family == POTENTIAL:
            lam_coef, rhs = self._S(z, m), self._S(z, n)
        else:
            lam_coef, rhs = self.h[m], self.h[n]
        r = np.arange(len(keys))
        rows = [r, r]
        cols = [np.full(len(keys), K), n + z]
        vals = [lam_coef * s, -m * self.powd[n + z + 1] * s]
        has = n > 0
        rows.append(r[has])
        cols.append((n + z - 1)[has])
        vals.append((n * self.powd[n + z] * s)[has])
        A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(len(keys), K + 1))
        return A, rhs * s

    def _add(self, keys: np.ndarray) -> None:
        keys = np.unique(keys, axis=0)
        fresh = np.array([tuple(k) not in self.active for k in keys.tolist()], dtype=bool)
        keys = keys[fresh]
        if keys.size:
            A, b = self.rows(keys)
            self.lp.add_rows(A, ">=", b)
            self.active.update(map(tuple, keys.tolist()))

    def decode(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        """``(lam, f'(0..K))`` from an LP point."""
        fp = np.concatenate([[0.0], x[: self.K] * self.powd[1: self.K + 1]])
        return float(x[self.K]), fp

    def block_minima(self, lam: float, fp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Most violated ``m`` and its scaled slack for every ``(n, z)`` block."""
        n, z = self.n_blk, self.z_blk
        t = fp[n + z + 1]
        if self.family == POTENTIAL:
            m0 = _phi_minimiser(lam * self.f, t, z, self.m_max)
        else:
            m0 = _sc_minimiser(lam * self.dh, t, self.m_max)
        best_s = np.full(n.size, np.inf)
        best_m = np.zeros(n.size, dtype=int)
        fp_nz = np.where(n + z > 0, fp[n + z], 0.0)
        for cand in (m0 - 1, m0, m0 + 1, np.zeros_like(m0)):
            m = np.clip(cand, 0, self.m_max)
            if self.family == POTENTIAL:
                sl = lam * self._S(z, m) - m * t + n * fp_nz - self._S(z, n)
            else:
                sl = lam * self.h[m] - m * t + n * fp_nz - self.h[n]
            sl = sl / np.maximum(n + z + 1, m + z).astype(float) ** (self.d + 1)
            better = sl < best_s
            best_s[better] = sl[better]
            best_m[better] = m[better]
        return best_m, best_s

    def oracle(self, x: np.ndarray) -> CutBatch | None:
        lam, fp = self.decode(x)
        m, s = self.block_minima(lam, fp)
        bad = np.nonzero(s < -CUT_TOL)[0]
        if bad.size == 0:
            return None
        keys = np.stack([self.n_blk[bad], self.z_blk[bad], m[bad]], 1)
        fresh = np.array([tuple(k) not in self.active for k in keys.tolist()], dtype=bool)
        keys = keys[fresh]
        if keys.size == 0:
            return None
        A, b = self.rows(keys)
        self.active.update(map(tuple, keys.tolist()))
        return CutBatch(A, ">=", b)

    def solve_at(self, lam_hat: float, max_rounds: int = 500) -> tuple[float, np.ndarray] | None:
        """LP optimum with ``f'(K) = nu(lam_hat) K^d``; ``None`` if infeasible."""
        nu = tail_nu(lam_hat, self.d, self.family)
        self.lp.lower[self.K - 1] = nu
        self.lp.upper[self.K - 1] = nu
        res = solve_lazy(self.lp, self.oracle, max_rounds=max_rounds)
        if res.status is Status.INFEASIBLE:
            return None
        if not res.optimal:
            raise LPError(f"truncated LP failed at lambda={lam_hat:.6g}: {res.status.value} ({res.message})")
        return self.decode(res.x)


def build_lp_phi_truncated(d: int, K: int = K_POTENTIAL) -> TruncatedLP:
    """``LP_phi^K`` for ``f(x) = x^d``: LP core plus separation oracle (``.lp``, ``.oracle``)."""
    return TruncatedLP(_check_degree(d), POTENTIAL, K)


def build_lp_sc_truncated(d: int, K: int = K_SOCIAL) -> TruncatedLP:
    """``LP_SC^K`` for ``f(x) = x^d``: LP core plus separation oracle (``.lp``, ``.oracle``)."""
    return TruncatedLP(_check_degree(d), SOCIAL_COST, K)


def solve_truncated(problem: TruncatedLP, rounds: int = 30, rel_tol: float = 1e-7) -> SmoothnessCertificate:
    """Bisection on the target ``lam`` that determines the pinned tail coefficient.

    ``g(lam_hat)`` (LP optimum at ``nu(lam_hat)``) is non-increasing, so the
    certified value is the smallest ``lam_hat`` with ``g(lam_hat) <= lam_hat``.
    The table is feasible at ``g(hi) <= hi`` and the tail needs ``hi``, so the
    certificate carries ``lam = hi``.
    """
    def g(lam_hat):
        out = problem.solve_at(lam_hat)
        return (math.inf, None) if out is None else out

    lo, hi = 1.0, 2.0
    g_hi, fp_hi = g(hi)
    while g_hi > hi:
        lo, hi = hi, 2 * hi
        if hi > 1e12:
            raise SmoothnessError("no feasible lambda found below 1e12")
        g_hi, fp_hi = g(hi)
    for _ in range(rounds):
        lo = max(lo, g_hi)
        if hi - lo <= rel_tol * hi:
            break
        mid = 0.5 * (lo + hi)
        g_mid, fp_mid = g(mid)
        if g_mid <= mid:
            hi, g_hi, fp_hi = mid, g_mid, fp_mid
        else:
            lo = mid
    return SmoothnessCertificate(
        fprime=(fp_hi,), lam=hi, objective=problem.family, scope=ObjectiveFamily(problem.family).scope,
        costs=(CostFunction.monomial(problem.d),), nu=tail_nu(hi, problem.d, problem.family),
        K=problem.K, degree=problem.d, lp_value=g_hi)


@lru_cache(maxsize=None)
def monomial_certificate(d: int, family: str, K: int | None = None) -> SmoothnessCertificate:
    """Cached optimal certificate for ``f(x) = x^d`` (table up to ``K``, tail beyond)."""
    _check_degree(d)
    _check_family(family)
    if K is None:
        K = K_POTENTIAL if family == POTENTIAL else K_SOCIAL
    return solve_truncated(TruncatedLP(d, family, K))


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class SmoothnessCertificate:
    """Modified cost tables ``f'_e(0..n)`` with the smoothness parameter they certify.

    When ``nu`` and ``degree`` are set the single-resource table is the head of
    ``f'(n) = nu n^d`` for ``n > K`` (see :meth:`extended`).
    """

    fprime: tuple[np.ndarray, ...]
    lam: float
    objective: str
    scope: str
    costs: tuple[CostFunction, ...]
    nu: float | None = None
    K: int | None = None
    degree: int | None = None
    lp_value: float | None = None

    def __post_init__(self) -> None:
        _check_family(self.objective)
        if self.scope not in ("plain", "strong"):
            raise SmoothnessError(f"scope must be 'plain' or 'strong', got {self.scope!r}")
        if len(self.fprime) != len(self.costs):
            raise SmoothnessError("one modified table per resource is required")
        if not self.lam >= 1.0 - 1e-12:
            raise SmoothnessError("lambda must be at least 1")
        object.__setattr__(self, "fprime", tuple(np.asarray(t, dtype=float) for t in self.fprime))

    @property
    def family(self) -> ObjectiveFamily:
        return ObjectiveFamily(self.objective)

    @property
    def n_max(self) -> int:
        return min(t.shape[0] for t in self.fprime) - 1

    def extended(self, upto: int) -> SmoothnessCertificate:
        """Tables continued to load ``upto`` with the tail ``coeff * nu * n^d``."""
        if upto <= self.n_max:
            return self
        if self.nu is None or self.degree is None:
            raise LoadOutOfRange(f"certificate covers loads up to {self.n_max} and has no tail")
        tables = []
        for t, c in zip(self.fprime, self.costs):
            coeff = c.coeffs[-1]
            k = np.arange(t.shape[0], upto + 1, dtype=float)
            tables.append(np.concatenate([t, coeff * self.nu * k ** self.degree]))
        return replace(self, fprime=tuple(tables))

    def sandwich_violation(self) -> float:
        """Largest relative breach of ``f <= f' <= lam f`` over the tables (0 if none)."""
        worst = 0.0
        for t, c in zip(self.fprime, self.costs):
            n = t.shape[0] - 1
            if c.n_max is not None:
                n = min(n, c.n_max)
            f = c.table_upto(n)[1:]
            fp = t[1: n + 1]
            scale = np.maximum(f, 1e-300)
            worst = max(worst, float(np.max((f - fp) / scale, initial=0.0)),
                        float(np.max((fp - self.lam * f) / scale, initial=0.0)))
        return worst

    def to_json(self) -> dict[str, Any]:
        return {
            "lambda": self.lam,
            "objective": self.objective,
            "scope": self.scope,
            "fprime": [t[1:].tolist() for t in self.fprime],
            "nu": self.nu,
            "K": self.K,
            "costs": [c.to_json() for c in self.costs],
            "degree": self.degree,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> SmoothnessCertificate:
        try:
            tables = tuple(np.concatenate([[0.0], np.asarray(t, dtype=float)]) for t in data["fprime"])
            degree = data.get("degree")
            if "costs" in data:
                costs = tuple(CostFunction.from_json(c) for c in data["costs"])
            elif degree is not None:
                costs = (CostFunction.monomial(int(degree)),) * len(tables)
            else:
                raise SmoothnessError("certificate JSON needs 'costs' or 'degree'")
            return cls(fprime=tables, lam=float(data["lambda"]), objective=data["objective"],
                       scope=data["scope"], costs=costs, nu=data.get("nu"), K=data.get("K"),
                       degree=None if degree is None else int(degree))
        except (KeyError, TypeError) as exc:
            raise SmoothnessError(f"malformed certificate JSON: {exc}") from exc


def rescale_mu(lam: float, mu: float, fprime) -> tuple[float, np.ndarray]:
    """Turn a ``(lam, mu)`` pair with ``mu < 1`` into ``(lam / (1 - mu), 0)`` by scaling costs."""
    if not mu < 1:
        raise SmoothnessError("mu must be below 1")
    return lam / (1.0 - mu), np.asarray(fprime, dtype=float) / (1.0 - mu)


@dataclass(frozen=True)
class VerifyResult:
    valid: bool
    worst_slack: float
    worst_relative: float
    witness: tuple[int, ...] | None
    resource: int | None


def _cost_range(c: CostFunction, upto: int) -> np.ndarray:
    t = c.table_upto(min(upto, c.n_max) if c.n_max is not None else upto).copy()
    t[0] = 0.0
    return t


def verify_certificate(cert: SmoothnessCertificate, exhaustive: bool = False,
                       n_max: int | None = None, m_max: int | None = None,
                       tol: float = VERIFY_TOL) -> VerifyResult:
    """Check every constraint of the certificate's family over the requested range.

    ``n_max`` bounds the load argument (``n`` resp. ``n + z``), defaulting to the
    largest load whose ``f'(n+1)`` is tabulated.  ``m_max`` defaults to the
    cost table range for tables and to the m-cutoff for polynomials.  Outside
    exhaustive mode the per-block minimum over ``m`` is located by sorted search,
    which is exact because the slack is convex in ``m``; non-convex social-cost
    objectives are always scanned in full.  A constraint fails when its slack is
    below ``-tol`` times the sum of the magnitudes of its terms.
    """
    worst = (math.inf, math.inf, None, None)  # (relative, raw, witness, resource)
    lam = cert.lam
    for e, (fp, c) in enumerate(zip(cert.fprime, cert.costs)):
        hi_n = fp.shape[0] - 2 if n_max is None else n_max
        if hi_n + 1 > fp.shape[0] - 1:
            raise LoadOutOfRange(f"resource {e}: f' tabulated up to {fp.shape[0] - 1}, need {hi_n + 1}")
        if c.n_max is not None:
            hi_n = min(hi_n, c.n_max)
            m_hi = c.n_max if m_max is None else min(m_max, c.n_max)
        else:
            deg = max(c.degree or 1, 1)
            m_hi = _m_cutoff(hi_n + 1, deg, cert.objective) if m_max is None else m_max
        if cert.objective == POTENTIAL:
            r = _verify_phi(c, fp, lam, hi_n, m_hi, exhaustive)
        else:
            r = _verify_sc(c, fp, lam, hi_n, m_hi, exhaustive)
        if r[0] < worst[0]:
            worst = (*r, e)
    rel, raw, wit, res = worst
    return VerifyResult(bool(rel >= -tol), float(raw), float(rel), wit, res)


def _rel(sl, scale):
    return np.where(scale > 0, sl / np.where(scale > 0, scale, 1.0), 0.0)


def _verify_phi(c, fp, lam, hi_n, m_hi, exhaustive):
    cap = None if c.n_max is None else c.n_max
    top = hi_n + m_hi + 2 if cap is None else cap
    f = _cost_range(c, top)
    P = np.cumsum(f)
    pairs = np.array([(n, s - n) for s in range(hi_n + 1) for n in range(s + 1)])
    n, z = pairs[:, 0], pairs[:, 1]
    t = fp[n + z + 1]
    fp_nz = np.where(n + z > 0, fp[n + z], 0.0)
    mlim = m_hi if cap is None else np.minimum(m_hi, cap - z)

    def slack(m):
        S_m = P[m + z_] - P[z_]
        S_n = P[n_ + z_] - P[z_]
        terms = (lam * S_m, m * t_, n_ * fpn_, S_n)
        return terms[0] - terms[1] + terms[2] - terms[3], _term_scale(*terms)

    best = (math.inf, math.inf, None)
    if exhaustive:
        for i in range(len(n)):
            n_, z_, t_, fpn_ = n[i], z[i], t[i], fp_nz[i]
            lim = int(mlim if np.ndim(mlim) == 0 else mlim[i])
            for start in range(0, lim + 1, 1 << 20):
                m = np.arange(start, min(lim, start + (1 << 20) - 1) + 1)
                sl, sc = slack(m)
                rel = _rel(sl, sc)
                k = int(np.argmin(rel))
                if rel[k] < best[0]:
                    best = (float(rel[k]), float(sl[k]), (int(n_), int(z_), int(m[k])))
        return best
    m0 = _phi_minimiser(lam * f, t, z, mlim)
    n_, z_, t_, fpn_ = n, z, t, fp_nz
    for cand in (m0 - 1, m0, m0 + 1, np.zeros_like(m0), np.broadcast_to(mlim, m0.shape)):
        m = np.clip(cand, 0, mlim)
        sl, sc = slack(m)
        rel = _rel(sl, sc)
        k = int(np.argmin(rel))
        if rel[k] < best[0]:
            best = (float(rel[k]), float(sl[k]), (int(n[k]), int(z[k]), int(m[k])))
    return best


def _verify_sc(c, fp, lam, hi_n, m_hi, exhaustive):
    top = max(hi_n, m_hi + 1) if c.n_max is None else min(max(hi_n, m_hi + 1), c.n_max)
    h = ObjectiveFamily(SOCIAL_COST).h(c, top)
    n = np.arange(hi_n + 1)
    t = fp[n + 1]
    fp_n = np.where(n > 0, fp[n], 0.0)
    dh = np.diff(h)
    convex = bool(np.all(np.diff(dh) >= -1e-12 * np.maximum(np.abs(dh[1:]), 1.0)))
    best = (math.inf, math.inf, None)

    def consider(nn, m):
        nonlocal best
        terms = (lam * h[m], m * t[nn], nn * fp_n[nn], h[nn])
        sl = terms[0] - terms[1] + terms[2] - terms[3]
        rel = _rel(sl, _term_scale(*terms))
        k = int(np.argmin(rel))
        if rel.flat[k] < best[0]:
            best = (float(rel.flat[k]), float(sl.flat[k]),
                    (int(np.broadcast_to(nn, rel.shape).flat[k]), int(np.broadcast_to(m, rel.shape).flat[k])))

    if exhaustive or not convex:
        chunk = max(1, (1 << 22) // (m_hi + 1))
        mm = np.arange(m_hi + 1)
        for s in range(0, hi_n + 1, chunk):
            nn = n[s: s + chunk, None]
            consider(nn, mm[None, :])
        return best
    m0 = _sc_minimiser(lam * dh[: m_hi], t, m_hi)
    for cand in (m0 - 1, m0, m0 + 1, np.zeros_like(m0), np.full_like(m0, m_hi)):
        consider(n, np.clip(cand, 0, m_hi))
    return best


def verify_tail_lemma(d: int, lam: float, family: str, scan: int = 10 ** 6) -> int:
    """Smallest load from which the closed-form tail inequality holds (up to ``scan``).

    Potential: ``(x+1)^(d+1) / (x^(d+1) - (x+1)^d + x^d) <= lam^(1/(d+1))``.
    Social cost: ``((n+1)/n)^(d+1) (1 - 1/(d+1)) <= ((d+1) lam)^(1/(d+1)) - 1``.
    """
    _check_degree(d)
    _check_family(family)
    if not lam > 1:
        raise SmoothnessError("lambda must exceed 1")
    x = np.arange(1, scan + 1, dtype=float)
    r = 1.0 + 1.0 / x
    if family == POTENTIAL:
        den = 1.0 - r ** d / x + 1.0 / x  # divided through by x^(d+1)
        lhs = np.where(den > 0, r ** (d + 1) / np.where(den > 0, den, 1.0), np.inf)
        ok = lhs <= lam ** (1.0 / (d + 1))
    else:
        ok = r ** (d + 1) * (1.0 - 1.0 / (d + 1)) <= ((d + 1) * lam) ** (1.0 / (d + 1)) - 1.0
    if not ok[-1]:
        raise SmoothnessError(f"tail inequality fails at the scan bound {scan}")
    bad = np.nonzero(~ok)[0]
    return 1 if bad.size == 0 else int(bad[-1]) + 2


# ---------------------------------------------------------------------------
# certificates for whole games


def certificate_for_game(game: CongestionGame, family: str = POTENTIAL,
                         method: str = "auto") -> SmoothnessCertificate:
    """Modified costs for every resource of ``game`` and the certified ``lam``.

    ``method="auto"`` splits polynomials of degree at most 5 into monomials and
    combines the cached monomial certificates (``a_0`` stays unmodified);
    tables and higher degrees get a finite LP over ``N = n_players`` with
    ``f'(N+1) >= f'(N)``.
    ``method="finite"`` uses the finite LP for every resource.
    """
    _check_family(family)
    if method not in ("auto", "finite"):
        raise SmoothnessError(f"unknown method {method!r}")
    N = game.n_players
    tables, lams = [], [1.0]
    finite_cache: dict[CostFunction, tuple[float, np.ndarray]] = {}
    for c in game.resources:
        deg = c.degree
        if method == "auto" and c.kind != "table" and deg is not None and deg <= MAX_DEGREE:
            a = np.asarray(c.coeffs, dtype=float)
            fp = np.full(N + 2, a[0])
            fp[0] = 0.0
            for i in range(1, a.size):
                if a[i] > 0:
                    mc = monomial_certificate(i, family).extended(N + 1)
                    fp = fp + a[i] * mc.fprime[0][: N + 2]
                    lams.append(mc.lam)
            tables.append(fp)
        else:
            if c not in finite_cache:
                if family == POTENTIAL:
                    finite_cache[c] = solve_lp_phi(c, N, load_cap=N, monotone_top=True)
                else:
                    finite_cache[c] = solve_lp_sc(c, N, monotone_top=True)
            lam_e, fp = finite_cache[c]
            tables.append(fp)
            lams.append(lam_e)
    return SmoothnessCertificate(fprime=tuple(tables), lam=max(lams), objective=family,
                                 scope=ObjectiveFamily(family).scope, costs=tuple(game.resources))


def certificate_from_fprime(costs, fprime, family: str, lam: float | None = None) -> SmoothnessCertificate:
    """Wrap given tables; with ``lam=None`` the smallest feasible ``lam`` is computed per resource."""
    _check_family(family)
    costs = tuple(costs)
    tables = tuple(np.asarray(t, dtype=float) for t in fprime)
    if lam is None:
        lam = 1.0
        for c, t in zip(costs, tables):
            N = t.shape[0] - 2
            fixed = t[1:]
            if family == POTENTIAL:
                res = solve(build_lp_phi(c, N, load_cap=N if c.n_max is None else None, fixed_fprime=fixed))
            else:
                res = solve(build_lp_sc(c, N, fixed_fprime=fixed))
            if not res.optimal:
                raise LPError(f"could not evaluate lambda for the given tables: {res.status.value}")
            lam = max(lam, float(res.x[-1]))
    return SmoothnessCertificate(fprime=tables, lam=lam, objective=family,
                                 scope=ObjectiveFamily(family).scope, costs=costs)


def fit_certificate(cert: SmoothnessCertificate, game: CongestionGame) -> SmoothnessCertificate:
    """Certificate tables for every resource of ``game`` covering loads up to ``N + 1``.

    A certificate made for the game's own cost functions is returned (extended
    if needed).  A single-monomial certificate of degree ``d`` is applied to
    resources ``a_0 + a_d x^d`` as ``a_0 + a_d f'``, which keeps the same lambda.
    """
    N = game.n_players
    if cert.costs == tuple(game.resources):
        return cert.extended(N + 1)
    if len(cert.fprime) != 1 or cert.degree is None:
        raise SmoothnessError("certificate does not match the game's resources")
    d = cert.degree
    base = cert.extended(N + 1).fprime[0][: N + 2] / cert.costs[0].coeffs[-1]
    tables = []
    for e, c in enumerate(game.resources):
        a = np.zeros(d + 1)
        if c.kind == "table" or c.degree > d:
            raise SmoothnessError(f"resource {e} is not of the form a0 + a x^{d}")
        a[: len(c.coeffs)] = c.coeffs
        if np.any(a[1:d] != 0):
            raise SmoothnessError(f"resource {e} is not of the form a0 + a x^{d}")
        fp = a[0] + a[d] * base
        fp[0] = 0.0
        tables.append(fp)
    return replace(cert, fprime=tuple(tables), costs=tuple(game.resources))
