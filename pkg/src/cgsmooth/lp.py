"""Linear programs with post-solve verification and lazy constraint generation.

Two backends sit behind :func:`solve`: ``"highs"`` (scipy's HiGHS, the default)
and ``"simplex"``, a dense two-phase tableau simplex with Bland's rule meant
for small programs and for cross-checking.  Whatever the backend, an
``OPTIMAL`` answer is only returned after every constraint and bound has been
re-checked at the returned point.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

log = logging.getLogger(__name__)

FEAS_TOL = 1e-8
OPT_TOL = 1e-7


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


class LPError(RuntimeError):
    pass


class LazyNonConvergence(LPError):
    """Lazy generation hit ``max_rounds``; carries the last candidate."""

    def __init__(self, message: str, last: LPResult):
        super().__init__(message)
        self.last = last


@dataclass
class LinearProgram:
    """``min/max c.x`` subject to ``A x (<=|>=) b`` and ``lower <= x <= upper``.

    Rows are stored internally in ``<=`` form; ``>=`` rows are negated on
    insertion.  Lower bounds default to 0, upper bounds to +inf.
    """

    n_vars: int
    objective: np.ndarray
    sense: str = "min"
    names: list[str] | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    _blocks: list[sp.csr_matrix] = field(default_factory=list, repr=False)
    _rhs: list[np.ndarray] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (self.n_vars,):
            raise LPError("objective length must equal the variable count")
        if self.sense not in ("min", "max"):
            raise LPError(f"unknown sense {self.sense!r}")
        self.lower = np.zeros(self.n_vars) if self.lower is None else np.asarray(self.lower, float)
        self.upper = np.full(self.n_vars, np.inf) if self.upper is None else np.asarray(self.upper, float)
        if self.names is not None and len(self.names) != self.n_vars:
            raise LPError("names must match the variable count")

    def add_constraint(self, coeffs, relation: str, rhs: float) -> None:
        """Add one row; ``coeffs`` is a dense vector or a ``{index: value}`` mapping."""
        if isinstance(coeffs, dict):
            row = np.zeros(self.n_vars)
            for j, v in coeffs.items():
                row[j] += v
        else:
            row = np.asarray(coeffs, dtype=float)
        if row.shape != (self.n_vars,):
            raise LPError("coefficient vector length must equal the variable count")
        self.add_rows(sp.csr_matrix(row.reshape(1, -1)), relation, np.array([float(rhs)]))

    def add_rows(self, rows, relation: str, rhs) -> None:
        """Bulk-add rows given as a (sparse or dense) matrix sharing one relation."""
        A = sp.csr_matrix(rows, dtype=float)
        b = np.asarray(rhs, dtype=float).reshape(-1)
        if A.shape[1] != self.n_vars or A.shape[0] != b.shape[0]:
            raise LPError("row block shape does not match the program")
        if not (np.all(np.isfinite(A.data)) and np.all(np.isfinite(b))):
            raise LPError("coefficients and right-hand sides must be finite")
        if relation == ">=":
            A, b = -A, -b
        elif relation != "<=":
            raise LPError(f"relation must be '<=' or '>=', got {relation!r}")
        self._blocks.append(A)
        self._rhs.append(b)

    @property
    def n_constraints(self) -> int:
        return sum(b.shape[0] for b in self._rhs)

    def matrix(self) -> tuple[sp.csr_matrix, np.ndarray]:
        """All rows in ``A x <= b`` form."""
        if not self._blocks:
            return sp.csr_matrix((0, self.n_vars)), np.zeros(0)
        return sp.vstack(self._blocks, format="csr"), np.concatenate(self._rhs)

    def copy(self) -> LinearProgram:
        lp = LinearProgram(self.n_vars, self.objective.copy(), self.sense,
                           None if self.names is None else list(self.names),
                           self.lower.copy(), self.upper.copy())
        lp._blocks = list(self._blocks)
        lp._rhs = list(self._rhs)
        return lp

    def to_text(self, max_rows: int | None = None) -> str:
        """Plain-text inequality listing, for debugging."""
        names = self.names or [f"x{j}" for j in range(self.n_vars)]

        def term_list(coefs, idx):
            return " ".join(f"{'+' if v >= 0 else '-'} {abs(v):.10g} {names[j]}"
                            for j, v in zip(idx, coefs)) or "0"

        nz = np.nonzero(self.objective)[0]
        lines = [f"{self.sense} {term_list(self.objective[nz], nz)}", "subject to"]
        A, b = self.matrix()
        for i in range(A.shape[0] if max_rows is None else min(max_rows, A.shape[0])):
            row = A.getrow(i)
            lines.append(f"  {term_list(row.data, row.indices)} <= {b[i]:.10g}")
        for j in range(self.n_vars):
            lo, hi = self.lower[j], self.upper[j]
            if lo != 0 or np.isfinite(hi):
                lines.append(f"  {lo:.10g} <= {names[j]} <= {hi:.10g}")
        return "\n".join(lines)


@dataclass
class LPResult:
    status: Status
    objective: float
    x: np.ndarray | None
    reduced_costs: np.ndarray | None = None
    max_violation: float = 0.0
    rounds: int = 1
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def _row_scale(A: sp.csr_matrix, b: np.ndarray) -> np.ndarray:
    absA = abs(A)
    rmax = np.asarray(absA.max(axis=1).todense()).reshape(-1) if A.shape[0] else np.zeros(0)
    return np.maximum(np.maximum(rmax, np.abs(b)), 1e-300)


def constraint_violation(lp: LinearProgram, x: np.ndarray) -> float:
    """Largest scaled violation of any row or bound at ``x`` (0 when feasible)."""
    A, b = lp.matrix()
    worst = 0.0
    if A.shape[0]:
        ax = A @ x
        scale = np.maximum(np.maximum(abs(A) @ np.abs(x), np.abs(b)), 1.0)
        worst = max(worst, float(np.max((ax - b) / scale)))
    lo_fin = np.isfinite(lp.lower)
    if lo_fin.any():
        lo = lp.lower[lo_fin]
        worst = max(worst, float(np.max((lo - x[lo_fin]) / np.maximum(np.abs(lo), 1.0))))
    up_fin = np.isfinite(lp.upper)
    if up_fin.any():
        up = lp.upper[up_fin]
        worst = max(worst, float(np.max((x[up_fin] - up) / np.maximum(np.abs(up), 1.0))))
    return max(worst, 0.0)


def solve(lp: LinearProgram, backend: str = "highs") -> LPResult:
    """Solve ``lp``; ``OPTIMAL`` results are re-verified against every row.

    The HiGHS backend tries dual simplex, then interior point, then HiGHS's own
    choice, and keeps the first answer that passes verification.
    """
    if backend == "highs":
        res = None
        for method in _HIGHS_METHODS:
            res = _verify(lp, _solve_highs(lp, method))
            if res.status is not Status.NUMERICAL_FAILURE:
                return res
            log.info("HiGHS %s: %s; retrying", method, res.message)
        return res
    if backend == "simplex":
        return _verify(lp, _solve_simplex(lp))
    raise LPError(f"unknown backend {backend!r}")


def _verify(lp: LinearProgram, res: LPResult) -> LPResult:
    if res.status is Status.OPTIMAL:
        res.max_violation = constraint_violation(lp, res.x)
        if res.max_violation > FEAS_TOL:
            res.status = Status.NUMERICAL_FAILURE
            res.message = f"post-solve violation {res.max_violation:.3g} > {FEAS_TOL}"
        elif res.reduced_costs is not None and np.min(res.reduced_costs) < -FEAS_TOL * max(
                1.0, float(np.max(np.abs(lp.objective)))):
            res.status = Status.NUMERICAL_FAILURE
            res.message = "negative reduced cost at the final basis"
    return res


_HIGHS_METHODS = ("highs-ds", "highs-ipm", "highs")
_HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def _solve_highs(lp: LinearProgram, method: str) -> LPResult:
    A, b = lp.matrix()
    sign = 1.0 if lp.sense == "min" else -1.0
    c = sign * lp.objective
    bounds = np.column_stack([np.where(np.isfinite(lp.lower), lp.lower, -np.inf),
                              np.where(np.isfinite(lp.upper), lp.upper, np.inf)])
    kwargs = {}
    if A.shape[0]:
        s = _row_scale(A, b)
        Dinv = sp.diags(1.0 / s)
        kwargs = {"A_ub": Dinv @ A, "b_ub": b / s}
    bnds = [(lo if np.isfinite(lo) else None, hi if np.isfinite(hi) else None) for lo, hi in bounds]
    out = linprog(c, bounds=bnds, method=method, options=dict(_HIGHS_OPTIONS), **kwargs)
    if out.status == 2:
        return LPResult(Status.INFEASIBLE, np.nan, None, message=out.message)
    if out.status == 3:
        return LPResult(Status.UNBOUNDED, -sign * np.inf, None, message=out.message)
    if out.status != 0 or out.x is None:
        return LPResult(Status.NUMERICAL_FAILURE, np.nan, None, message=out.message)
    x = np.asarray(out.x, dtype=float)
    # reduced costs d = c - A^T y; HiGHS reports them split over the two bound sides
    rc = None
    if getattr(out, "lower", None) is not None and out.lower.marginals is not None:
        rc_lo = np.asarray(out.lower.marginals)
        rc_up = np.asarray(out.upper.marginals)
        at_upper = np.isfinite(bounds[:, 1]) & (np.abs(x - bounds[:, 1]) <= 1e-9 * np.maximum(1, np.abs(x)))
        rc = np.where(at_upper, -rc_up, rc_lo)
    return LPResult(Status.OPTIMAL, float(lp.objective @ x), x, reduced_costs=rc, message=out.message)


def _solve_simplex(lp: LinearProgram) -> LPResult:
    """Dense two-phase tableau simplex with Bland's rule (small programs only)."""
    A, b = lp.matrix()
    A = A.toarray()
    n = lp.n_vars
    sign = 1.0 if lp.sense == "min" else -1.0
    c = sign * lp.objective
    # substitute x = lower + x'  (finite lower) or x = x+ - x-  (free)
    cols, shift = [], np.zeros(n)
    for j in range(n):
        if np.isfinite(lp.lower[j]):
            shift[j] = lp.lower[j]
            cols.append((j, 1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    T = np.column_stack([A[:, j] * s for j, s in cols]) if A.shape[0] else np.zeros((0, len(cols)))
    cc = np.array([c[j] * s for j, s in cols])
    rhs = b - A @ shift if A.shape[0] else np.zeros(0)
    # finite upper bounds become rows
    ub_rows = []
    for j in range(n):
        if np.isfinite(lp.upper[j]):
            row = np.zeros(len(cols))
            for k, (jj, s) in enumerate(cols):
                if jj == j:
                    row[k] = s
            ub_rows.append((row, lp.upper[j] - shift[j]))
    if ub_rows:
        T = np.vstack([T] + [r for r, _ in ub_rows])
        rhs = np.concatenate([rhs, [v for _, v in ub_rows]])
    x_std, red, status = _tableau_simplex(T, rhs, cc)
    if status is not Status.OPTIMAL:
        return LPResult(status, np.nan if status is Status.INFEASIBLE else -sign * np.inf, None)
    x = shift.copy()
    rc = np.full(n, np.nan)
    for k, (j, s) in enumerate(cols):
        x[j] += s * x_std[k]
        if np.isnan(rc[j]):
            rc[j] = red[k]
    return LPResult(Status.OPTIMAL, float(lp.objective @ x), x, reduced_costs=rc)


def _tableau_simplex(A: np.ndarray, b: np.ndarray, c: np.ndarray,
                     tol: float = 1e-10, max_iter: int = 50_000):
    """min c.x s.t. A x <= b, x >= 0 via slack + artificial two-phase simplex.

    Returns ``(x, reduced_costs, status)``; the reduced costs are those of the
    structural columns at the final basis.
    """
    m, n = A.shape
    A = A.copy()
    b = b.copy()
    # slacks; rows with negative rhs are flipped and receive an artificial
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    slack = np.eye(m)
    slack[neg] *= -1
    art_rows = np.nonzero(neg)[0]
    art = np.zeros((m, len(art_rows)))
    for k, i in enumerate(art_rows):
        art[i, k] = 1.0
    tab = np.hstack([A, slack, art, b.reshape(-1, 1)])
    n_total = n + m + len(art_rows)
    basis = np.array([n + i if not neg[i] else n + m + list(art_rows).index(i) for i in range(m)])

    def pivot(r, q):
        tab[r] /= tab[r, q]
        for i in range(m):
            if i != r and tab[i, q] != 0:
                tab[i] -= tab[i, q] * tab[r]
        basis[r] = q

    def run(cost, allowed):
        for _ in range(max_iter):
            cb = cost[basis]
            red = cost[:n_total] - cb @ tab[:, :n_total]
            entering = [j for j in range(n_total) if allowed[j] and red[j] < -tol]
            if not entering:
                return Status.OPTIMAL
            q = entering[0]  # Bland: lowest index
            col = tab[:, q]
            ratios = [(tab[i, -1] / col[i], basis[i], i) for i in range(m) if col[i] > tol]
            if not ratios:
                return Status.UNBOUNDED
            best = min(r[0] for r in ratios)
            r = min((rb, i) for ratio, rb, i in ratios if ratio <= best + tol)[1]
            pivot(r, q)
        return Status.NUMERICAL_FAILURE

    allowed = np.ones(n_total, dtype=bool)
    if len(art_rows):
        phase1 = np.zeros(n_total)
        phase1[n + m:] = 1.0
        st = run(phase1, allowed)
        if st is not Status.OPTIMAL:
            return None, None, Status.NUMERICAL_FAILURE
        if phase1[basis] @ tab[:, -1] > 1e-8 * max(1.0, np.abs(b).max()):
            return None, None, Status.INFEASIBLE
        # drive remaining artificials out of the basis
        for i in range(m):
            if basis[i] >= n + m:
                nz = [j for j in range(n + m) if abs(tab[i, j]) > tol]
                if nz:
                    pivot(i, nz[0])
        allowed[n + m:] = False
    cost = np.concatenate([c, np.zeros(m + len(art_rows))])
    st = run(cost, allowed)
    if st is not Status.OPTIMAL:
        return None, None, st
    x = np.zeros(n_total)
    x[basis] = tab[:, -1]
    red = cost[:n_total] - cost[basis] @ tab[:, :n_total]
    return x[:n], red[:n], Status.OPTIMAL


@dataclass
class CutBatch:
    """Violated rows returned by a separation oracle, all in one relation."""

    rows: sp.csr_matrix
    relation: str
    rhs: np.ndarray

    def __len__(self) -> int:
        return self.rows.shape[0]


class SeparationOracle(Protocol):
    """Given a candidate point, return violated rows (``None``/empty when feasible).

    Every returned row must be violated at the candidate by more than the
    feasibility tolerance; :func:`solve_lazy` rejects oracles that break this.
    """

    def __call__(self, x: np.ndarray) -> CutBatch | None: ...


def _cut_violation(cuts: CutBatch, x: np.ndarray) -> np.ndarray:
    ax = cuts.rows @ x
    gap = (ax - cuts.rhs) if cuts.relation == "<=" else (cuts.rhs - ax)
    scale = np.maximum(np.maximum(abs(cuts.rows) @ np.abs(x), np.abs(cuts.rhs)), 1.0)
    return gap / scale


def solve_lazy(lp_core: LinearProgram, oracle: SeparationOracle, max_rounds: int = 200,
               final_sweep: Callable[[np.ndarray], CutBatch | None] | None = None,
               backend: str = "highs", cut_tol: float = 1e-12) -> LPResult:
    """Cutting-plane loop: solve, ask the oracle for violated rows, add them, repeat.

    ``lp_core`` is extended in place, so repeated calls reuse earlier cuts.
    ``final_sweep`` (optional) is consulted once the oracle is satisfied; any
    rows it returns are added and the loop resumes.
    """
    res = None
    for rounds in range(1, max_rounds + 1):
        res = solve(lp_core, backend=backend)
        res.rounds = rounds
        if not res.optimal:
            return res
        cuts = oracle(res.x)
        if (cuts is None or len(cuts) == 0) and final_sweep is not None:
            cuts = final_sweep(res.x)
        if cuts is None or len(cuts) == 0:
            return res
        viol = _cut_violation(cuts, res.x)
        if np.any(viol <= cut_tol):
            raise LPError("separation oracle returned a row that is not violated")
        lp_core.add_rows(cuts.rows, cuts.relation, cuts.rhs)
        log.debug("round %d: %d cuts, objective %.10g", rounds, len(cuts), res.objective)
    raise LazyNonConvergence(f"no convergence after {max_rounds} rounds", res)
