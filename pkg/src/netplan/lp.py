"""Sparse linear program container and solvers.

Two backends share one contract: ``"highs"`` (HiGHS through highspy, used
for anything of realistic size) and ``"simplex"``, a dense two-phase primal
simplex kept for small problems and cross-checking. Every optimal answer is
re-verified against the constraints before it is returned; a point that
fails verification is reported as ``numeric_failure``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

EPS_FEAS = 1e-7
EPS_OPT = 1e-6
ABS_FLOOR = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERIC_FAILURE = "numeric_failure"

LE, GE, EQ = "<=", ">=", "="
_SENSES = (LE, GE, EQ)


class LpError(RuntimeError):
    """An LP could not be solved to optimality."""

    def __init__(self, status: str, message: str = ""):
        self.status = status
        super().__init__(message or f"LP status: {status}")


@dataclass
class LinearProgram:
    """min cost @ x  s.t.  rows (sense) rhs,  lower <= x <= upper."""

    names: list[str]
    lower: np.ndarray
    upper: np.ndarray
    cost: np.ndarray
    matrix: sp.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    row_names: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def index(self) -> dict[str, int]:
        return {name: j for j, name in enumerate(self.names)}

    def validate(self):
        n = self.n_vars
        if len(self.index) != n:
            raise ValueError("duplicate variable names")
        for arr, what in ((self.lower, "lower"), (self.upper, "upper"), (self.cost, "cost")):
            if arr.shape != (n,):
                raise ValueError(f"{what} has wrong length")
        if self.matrix.shape != (len(self.rhs), n) or len(self.senses) != len(self.rhs):
            raise ValueError("constraint arrays have inconsistent shapes")
        if np.isnan(self.lower).any() or np.isnan(self.upper).any():
            raise ValueError("NaN bound")
        if (self.lower > self.upper).any():
            j = int(np.argmax(self.lower > self.upper))
            raise ValueError(f"lower > upper for {self.names[j]}")
        if not np.isfinite(self.cost).all():
            raise ValueError("non-finite objective coefficient")
        if not np.isfinite(self.matrix.data).all() or not np.isfinite(self.rhs).all():
            raise ValueError("non-finite constraint data")
        bad = set(np.unique(self.senses)) - set(_SENSES)
        if bad:
            raise ValueError(f"unknown relation(s) {sorted(bad)}")

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.where(self.senses == LE, -np.inf, self.rhs)
        hi = np.where(self.senses == GE, np.inf, self.rhs)
        return lo, hi

    def max_violation(self, x: np.ndarray) -> float:
        """Largest bound or constraint violation of ``x``."""
        viol = 0.0
        if self.n_vars:
            viol = max(float(np.max(self.lower - x, initial=0.0)),
                       float(np.max(x - self.upper, initial=0.0)))
        if self.n_rows:
            ax = self.matrix @ x
            lo, hi = self.row_bounds()
            viol = max(viol, float(np.max(lo - ax, initial=0.0)), float(np.max(ax - hi, initial=0.0)))
        return viol


class LpBuilder:
    """Incremental construction of a LinearProgram."""

    def __init__(self):
        self.names: list[str] = []
        self._lower: list[float] = []
        self._upper: list[float] = []
        self._cost: list[float] = []
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self.row_names: list[str] = []

    def add_var(self, name: str, lower: float = 0.0, upper: float = math.inf, cost: float = 0.0) -> int:
        self.names.append(name)
        self._lower.append(lower)
        self._upper.append(upper)
        self._cost.append(cost)
        return len(self.names) - 1

    def add_row(self, cols, coefs, sense: str, rhs: float, name: str = "") -> int:
        if sense not in _SENSES:
            raise ValueError(f"unknown relation {sense!r}")
        r = len(self._rhs)
        cols = list(cols)
        coefs = list(coefs)
        if len(cols) != len(coefs):
            raise ValueError("cols/coefs length mismatch")
        n = len(self.names)
        for c in cols:
            if not 0 <= c < n:
                raise ValueError(f"row {name or r} references undeclared variable {c}")
        self._rows.extend([r] * len(cols))
        self._cols.extend(cols)
        self._vals.extend(coefs)
        self._senses.append(sense)
        self._rhs.append(rhs)
        self.row_names.append(name or f"r{r}")
        return r

    def build(self) -> LinearProgram:
        m, n = len(self._rhs), len(self.names)
        matrix = sp.csr_matrix((np.asarray(self._vals, dtype=float),
                                (np.asarray(self._rows, dtype=np.int64), np.asarray(self._cols, dtype=np.int64))),
                               shape=(m, n))
        matrix.sum_duplicates()
        lp = LinearProgram(list(self.names), np.asarray(self._lower, dtype=float),
                           np.asarray(self._upper, dtype=float), np.asarray(self._cost, dtype=float),
                           matrix, np.asarray(self._senses, dtype="<U2"), np.asarray(self._rhs, dtype=float),
                           list(self.row_names))
        lp.validate()
        return lp


@dataclass
class LpSolution:
    status: str
    objective_value: float
    values: np.ndarray
    names: list[str]
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    @cached_property
    def primal(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}


def _failed(lp: LinearProgram, status: str, iterations: int = 0) -> LpSolution:
    return LpSolution(status, math.nan, np.full(lp.n_vars, math.nan), lp.names, iterations)


def _checked(lp: LinearProgram, x: np.ndarray, iterations: int) -> LpSolution:
    if lp.max_violation(x) > EPS_FEAS * max(1.0, float(np.max(np.abs(lp.rhs), initial=0.0))):
        return _failed(lp, NUMERIC_FAILURE, iterations)
    return LpSolution(OPTIMAL, float(lp.cost @ x), x, lp.names, iterations)


def solve_lp(lp: LinearProgram, backend: str = "highs") -> LpSolution:
    """Solve ``lp`` (minimization)."""
    lp.validate()
    if backend == "highs":
        return _solve_highs(lp)
    if backend == "simplex":
        return solve_simplex(lp)
    raise ValueError(f"unknown LP backend {backend!r}")


def require_optimal(sol: LpSolution, what: str = "LP") -> LpSolution:
    if sol.status != OPTIMAL:
        raise LpError(sol.status, f"{what}: solver returned {sol.status}")
    return sol


# ----------------------------------------------------------------- HiGHS

def _load_highs(lp: LinearProgram):
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("random_seed", 0)
    h.setOptionValue("threads", 1)
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    inf = highspy.kHighsInf
    n = lp.n_vars
    lower = np.where(np.isfinite(lp.lower), lp.lower, -inf)
    upper = np.where(np.isfinite(lp.upper), lp.upper, inf)
    h.addVars(n, lower, upper)
    if n:
        h.changeColsCost(n, np.arange(n, dtype=np.int32), lp.cost)
    if lp.n_rows:
        lo, hi = lp.row_bounds()
        lo = np.where(np.isfinite(lo), lo, -inf)
        hi = np.where(np.isfinite(hi), hi, inf)
        a = lp.matrix.tocsr()
        h.addRows(lp.n_rows, lo, hi, a.nnz, a.indptr[:-1].astype(np.int32),
                  a.indices.astype(np.int32), a.data.astype(float))
    return h


def _highs_status(h) -> str:
    import highspy

    status = h.getModelStatus()
    if status == highspy.HighsModelStatus.kOptimal:
        return OPTIMAL
    if status == highspy.HighsModelStatus.kInfeasible:
        return INFEASIBLE
    if status == highspy.HighsModelStatus.kUnbounded:
        return UNBOUNDED
    if status == highspy.HighsModelStatus.kUnboundedOrInfeasible:
        return "unbounded_or_infeasible"
    return NUMERIC_FAILURE


def _solve_highs(lp: LinearProgram) -> LpSolution:
    h = _load_highs(lp)
    h.run()
    status = _highs_status(h)
    iters = int(h.getInfo().simplex_iteration_count)
    if status == "unbounded_or_infeasible":
        # Decide by a pure feasibility solve.
        probe = _load_highs(LinearProgram(lp.names, lp.lower, lp.upper, np.zeros(lp.n_vars),
                                          lp.matrix, lp.senses, lp.rhs))
        probe.setOptionValue("presolve", "off")
        probe.run()
        status = UNBOUNDED if _highs_status(probe) == OPTIMAL else INFEASIBLE
    if status != OPTIMAL:
        return _failed(lp, status, iters)
    x = np.asarray(h.getSolution().col_value, dtype=float)
    return _checked(lp, x, iters)


class HighsSession:
    """A loaded HiGHS model whose bounds can be changed between solves.

    With ``fresh=True`` each solve starts from scratch, so results do not
    depend on the order of previous solves; otherwise the previous basis is
    reused.
    """

    def __init__(self, lp: LinearProgram, fresh: bool = False):
        lp.validate()
        self.lp = LinearProgram(lp.names, lp.lower.copy(), lp.upper.copy(), lp.cost.copy(),
                                lp.matrix, lp.senses.copy(), lp.rhs.copy(), lp.row_names, lp.meta)
        self.fresh = fresh
        self._h = _load_highs(self.lp)
        self.solves = 0

    def set_rhs(self, rows, values):
        import highspy

        rows = np.asarray(rows, dtype=np.int32)
        values = np.asarray(values, dtype=float)
        self.lp.rhs[rows] = values
        senses = self.lp.senses[rows]
        lo = np.where(senses == LE, -highspy.kHighsInf, values)
        hi = np.where(senses == GE, highspy.kHighsInf, values)
        self._h.changeRowsBounds(len(rows), rows, lo, hi)

    def set_col_bounds(self, cols, lower, upper):
        import highspy

        cols = np.asarray(cols, dtype=np.int32)
        lower = np.broadcast_to(np.asarray(lower, dtype=float), cols.shape).copy()
        upper = np.broadcast_to(np.asarray(upper, dtype=float), cols.shape).copy()
        self.lp.lower[cols] = lower
        self.lp.upper[cols] = upper
        inf = highspy.kHighsInf
        self._h.changeColsBounds(len(cols), cols, np.where(np.isfinite(lower), lower, -inf),
                                 np.where(np.isfinite(upper), upper, inf))

    def solve(self) -> LpSolution:
        if self.fresh:
            self._h.clearSolver()
        self._h.run()
        self.solves += 1
        status = _highs_status(self._h)
        if status != OPTIMAL:
            # Let the one-shot path sort out infeasible vs unbounded.
            return _solve_highs(self.lp)
        x = np.asarray(self._h.getSolution().col_value, dtype=float)
        return _checked(self.lp, x, int(self._h.getInfo().simplex_iteration_count))


# ------------------------------------------------------- dense simplex

def _to_standard_form(lp: LinearProgram):
    """Rewrite as  min c'y + c0  s.t.  A y = b, y >= 0.

    Returns (A, b, c, c0, recover) where recover maps y back to x.
    """
    dense = lp.matrix.toarray()
    n = lp.n_vars
    cols = []  # (source var, sign) per standard column
    shift = np.zeros(n)
    extra_rows = []  # (std col, bound) for y <= ub - lb
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ncol = len(cols)
    t = np.zeros((n, ncol))
    for i, (j, s) in enumerate(cols):
        t[j, i] = s
    a_std = dense @ t
    b = lp.rhs - dense @ shift
    senses = list(lp.senses)
    if extra_rows:
        extra = np.zeros((len(extra_rows), ncol))
        for r, (i, bound) in enumerate(extra_rows):
            extra[r, i] = 1.0
        a_std = np.vstack([a_std, extra])
        b = np.concatenate([b, [bd for _, bd in extra_rows]])
        senses += [LE] * len(extra_rows)
    m = len(b)
    n_slack = sum(1 for s in senses if s != EQ)
    a_full = np.zeros((m, ncol + n_slack))
    a_full[:, :ncol] = a_std
    k = ncol
    for r, s in enumerate(senses):
        if s == LE:
            a_full[r, k] = 1.0
            k += 1
        elif s == GE:
            a_full[r, k] = -1.0
            k += 1
    c = np.zeros(ncol + n_slack)
    c[:ncol] = lp.cost @ t
    c0 = float(lp.cost @ shift)

    def recover(y):
        return shift + t @ y[:ncol]

    return a_full, b, c, c0, recover


class _Tableau:
    def __init__(self, a, b, max_pivots, bland_after, tol=1e-9):
        m, n = a.shape
        neg = b < 0
        a = a.copy()
        b = b.copy()
        a[neg] *= -1
        b[neg] *= -1
        # columns: original n, then m artificials; last column is rhs
        self.t = np.zeros((m + 1, n + m + 1))
        self.t[:m, :n] = a
        self.t[:m, n:n + m] = np.eye(m)
        self.t[:m, -1] = b
        self.basis = list(range(n, n + m))
        self.n = n
        self.m = m
        self.tol = tol
        self.pivots = 0
        self.max_pivots = max_pivots
        self.bland_after = bland_after

    def pivot(self, r, j):
        t = self.t
        t[r] /= t[r, j]
        col = t[:, j].copy()
        col[r] = 0.0
        t -= np.outer(col, t[r])
        t[np.abs(t) < 1e-13] = 0.0
        self.basis[r] = j
        self.pivots += 1

    def set_objective(self, c_full):
        # objective row holds reduced costs; rhs cell holds -z
        t = self.t
        t[-1, :] = 0.0
        t[-1, :len(c_full)] = c_full
        for r, j in enumerate(self.basis):
            if t[-1, j] != 0.0:
                t[-1] -= t[-1, j] * t[r]

    def run(self, allowed):
        """Iterate until optimal; returns 'optimal', 'unbounded' or 'limit'."""
        t = self.t
        while True:
            if self.pivots >= self.max_pivots:
                return "limit"
            red = t[-1, :-1].copy()
            red[~allowed] = 0.0
            candidates = np.flatnonzero(red < -self.tol)
            if candidates.size == 0:
                return "optimal"
            bland = self.pivots >= self.bland_after
            j = int(candidates[0]) if bland else int(candidates[np.argmin(red[candidates])])
            col = t[:-1, j]
            pos = np.flatnonzero(col > self.tol)
            if pos.size == 0:
                return "unbounded"
            ratios = t[pos, -1] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + self.tol * max(1.0, abs(best))]
            r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(r, j)


def solve_simplex(lp: LinearProgram, max_pivots: int | None = None) -> LpSolution:
    """Two-phase dense tableau simplex; Dantzig pricing, Bland's rule after a threshold."""
    lp.validate()
    a, b, c, c0, recover = _to_standard_form(lp)
    m, n = a.shape
    if max_pivots is None:
        max_pivots = 50 * (m + n) + 1000
    if m == 0:
        if (c < -1e-12).any():
            return _failed(lp, UNBOUNDED)
        return _checked(lp, recover(np.zeros(n)), 0)
    tab = _Tableau(a, b, max_pivots=max_pivots, bland_after=5 * (m + n) + 50)
    # phase 1
    phase1 = np.concatenate([np.zeros(n), np.ones(m)])
    tab.set_objective(phase1)
    allowed = np.ones(n + m, dtype=bool)
    state = tab.run(allowed)
    if state == "limit":
        return _failed(lp, NUMERIC_FAILURE, tab.pivots)
    infeas = -tab.t[-1, -1]
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if infeas > 1e-8 * scale:
        return _failed(lp, INFEASIBLE, tab.pivots)
    # drive remaining artificials out; drop redundant rows
    drop = []
    for r in range(m):
        if tab.basis[r] >= n:
            row = tab.t[r, :n]
            nz = np.flatnonzero(np.abs(row) > 1e-9)
            if nz.size:
                tab.pivot(r, int(nz[0]))
            else:
                drop.append(r)
    if drop:
        keep = [r for r in range(m) if r not in drop]
        tab.t = np.vstack([tab.t[keep], tab.t[-1:]])
        tab.basis = [tab.basis[r] for r in keep]
        tab.m = len(keep)
    allowed = np.zeros(n + m, dtype=bool)
    allowed[:n] = True
    tab.set_objective(np.concatenate([c, np.zeros(m)]))
    state = tab.run(allowed)
    if state == "limit":
        return _failed(lp, NUMERIC_FAILURE, tab.pivots)
    if state == "unbounded":
        return _failed(lp, UNBOUNDED, tab.pivots)
    y = np.zeros(n + m)
    for r, j in enumerate(tab.basis):
        y[j] = tab.t[r, -1]
    x = recover(y[:n])
    return _checked(lp, x, tab.pivots)


# ------------------------------------------------------------- debug dump

def _fmt(v: float) -> str:
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return repr(float(v))


def dump_lp(lp: LinearProgram) -> str:
    """Plain-text listing: one variable per line, then one constraint per line."""
    out = [f"# {lp.n_vars} variables, {lp.n_rows} constraints, minimize"]
    for name, lo, hi, c in zip(lp.names, lp.lower, lp.upper, lp.cost):
        out.append(f"var {name} [{_fmt(lo)}, {_fmt(hi)}] cost {_fmt(c)}")
    a = lp.matrix.tocsr()
    for r in range(lp.n_rows):
        lo, hi = a.indptr[r], a.indptr[r + 1]
        terms = " + ".join(f"{_fmt(v)} {lp.names[j]}" for j, v in zip(a.indices[lo:hi], a.data[lo:hi]))
        name = lp.row_names[r] if r < len(lp.row_names) else f"r{r}"
        out.append(f"con {name}: {terms or '0'} {lp.senses[r]} {_fmt(lp.rhs[r])}")
    return "\n".join(out) + "\n"
