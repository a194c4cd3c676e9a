"""Linear programs and a two-phase primal simplex in exact or float arithmetic.

Small programs are solved by the tableau simplex in this module. Programs too
large for a dense tableau are handed to HiGHS (through scipy) in float
arithmetic; in rational mode the float optimum is then rebuilt exactly from its
support and certified optimal by an exact dual solution, so the returned
values are exact either way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._rational import FLOAT_TOL, fmt

LE, EQ, GE = "<=", "=", ">="
RELATIONS = (LE, EQ, GE)
PIVOT_TOL = 1e-9
DENSE_LIMIT = 20_000  # rows * columns handled by the tableau in "auto" mode


class SolverError(RuntimeError):
    """Numerical breakdown or a failed exact certification."""


@dataclass(frozen=True)
class Row:
    coeffs: tuple  # ((column index, value), ...) sorted by column, no zeros
    rel: str
    rhs: object

    def value(self, x):
        return sum((a * x[j] for j, a in self.coeffs), 0 * self.rhs)


@dataclass
class LinearProgram:
    """``minimize objective . x`` subject to ``rows``; columns carry a lower bound.

    ``lower[j]`` is 0 or None (free column). Coefficients are Fractions; the
    float mode of :func:`solve` converts them on the fly.
    """

    column_ids: list
    lower: list
    rows: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)

    @property
    def num_columns(self):
        return len(self.column_ids)

    def add_row(self, coeffs, rel, rhs):
        if rel not in RELATIONS:
            raise ValueError(f"unknown relation {rel!r}")
        clean = {}
        for j, a in coeffs.items() if isinstance(coeffs, dict) else coeffs:
            if not 0 <= j < self.num_columns:
                raise ValueError(f"row references undeclared column {j}")
            clean[j] = clean.get(j, 0) + a
        items = tuple(sorted((j, a) for j, a in clean.items() if a != 0))
        self.rows.append(Row(items, rel, rhs))

    def validate(self):
        for row in self.rows:
            for j, a in row.coeffs:
                if not 0 <= j < self.num_columns:
                    raise ValueError(f"row references undeclared column {j}")
                if isinstance(a, float) and not math.isfinite(a):
                    raise ValueError("non-finite coefficient")
        for j in self.objective:
            if not 0 <= j < self.num_columns:
                raise ValueError(f"objective references undeclared column {j}")

    def dump(self, path_or_file):
        """Plain-text dump: one ``col``/``obj``/``row`` record per line."""
        lines = [f"# minimize; {self.num_columns} columns, {len(self.rows)} rows"]
        for j, (cid, lb) in enumerate(zip(self.column_ids, self.lower)):
            lines.append(f"col {j} {'free' if lb is None else fmt(lb)} {cid}")
        lines.append("obj " + " ".join(f"{j}:{fmt(a)}" for j, a in sorted(self.objective.items())))
        for row in self.rows:
            pairs = " ".join(f"{j}:{fmt(a)}" for j, a in row.coeffs)
            lines.append(f"row {row.rel} {fmt(row.rhs)} {pairs}")
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w") as fh:
                fh.write(text)


@dataclass(frozen=True)
class LpOutcome:
    status: str  # "optimal" | "infeasible" | "unbounded"
    values: tuple | None
    objective: object
    mode: str
    backend: str
    duals: tuple | None = None
    pivots: int = 0

    def value_of(self, lp, column_id):
        return self.values[lp.column_ids.index(column_id)]


@dataclass(frozen=True)
class ResidualReport:
    max_row_residual: object
    max_bound_violation: object
    duality_gap: object | None

    def ok(self, tol=FLOAT_TOL):
        gap = 0 if self.duality_gap is None else abs(self.duality_gap)
        return self.max_row_residual <= tol and self.max_bound_violation <= tol and gap <= 1e-6


# --------------------------------------------------------------------------
# standard form shared by both tableau modes


def _standard_form(lp, num):
    """Rows as ``A x = b`` with ``b >= 0`` over split free columns and slacks.

    Returns the dense matrix, rhs, cost vector, initial basis (slack or
    artificial per row), artificial column set and a map back to lp columns.
    """
    n = lp.num_columns
    back = []  # standard column -> (lp column, sign) or None for slacks
    for j in range(n):
        back.append((j, 1))
        if lp.lower[j] is None:
            back.append((j, -1))
    first = {}
    for s, item in enumerate(back):
        first.setdefault(item[0], s)
    m = len(lp.rows)
    zero = num(0)
    base = len(back)
    slack_of = {}
    rels = []
    for i, row in enumerate(lp.rows):
        flip = num(row.rhs) < 0
        rel = row.rel
        if flip:
            rel = {LE: GE, GE: LE, EQ: EQ}[rel]
        rels.append((rel, flip))
        if rel != EQ:
            slack_of[i] = base + len(slack_of)
    width = base + len(slack_of)
    artificial = {}
    for i, (rel, _) in enumerate(rels):
        if rel != LE:
            artificial[i] = width + len(artificial)
    total = width + len(artificial)
    A = [[zero] * total for _ in range(m)]
    b = [zero] * m
    for i, row in enumerate(lp.rows):
        rel, flip = rels[i]
        sign = -1 if flip else 1
        for j, a in row.coeffs:
            a = num(a) * sign
            A[i][first[j]] = a
            if lp.lower[j] is None:
                A[i][first[j] + 1] = -a
        b[i] = num(row.rhs) * sign
        if i in slack_of:
            A[i][slack_of[i]] = num(1) if rel == LE else num(-1)
        if i in artificial:
            A[i][artificial[i]] = num(1)
    cost = [zero] * total
    for j, a in lp.objective.items():
        cost[first[j]] = num(a)
        if lp.lower[j] is None:
            cost[first[j] + 1] = -num(a)
    basis = [artificial.get(i, slack_of.get(i)) for i in range(m)]
    return A, b, cost, basis, set(artificial.values()), back, width


def _priority_order(lp, back, width, warm_start):
    order = list(range(width))
    if not warm_start:
        return order
    if isinstance(warm_start, dict):
        preferred = {lp.column_ids.index(c) if c in lp.column_ids else c
                     for c, v in warm_start.items() if v != 0}
    else:
        preferred = {lp.column_ids.index(c) if c in lp.column_ids else c for c in warm_start}
    def key(s):
        return (0 if s < len(back) and back[s][0] in preferred else 1, s)
    return sorted(order, key=key)


class _RationalTableau:
    def __init__(self, A, b, basis):
        self.A = A
        self.b = b
        self.basis = basis
        self.pivots = 0

    def pivot(self, r, q, cost_rows):
        A, b = self.A, self.b
        prow = A[r]
        inv = 1 / prow[q]
        if inv != 1:
            for s in range(len(prow)):
                if prow[s]:
                    prow[s] *= inv
            b[r] *= inv
        nz = [s for s, a in enumerate(prow) if a]
        for i, row in enumerate(A):
            if i != r and row[q]:
                f = row[q]
                for s in nz:
                    row[s] -= f * prow[s]
                b[i] -= f * b[r]
        for crow in cost_rows:
            f = crow[0][q]
            if f:
                for s in nz:
                    crow[0][s] -= f * prow[s]
                crow[1] -= f * b[r]
        self.basis[r] = q
        self.pivots += 1

    def run(self, cost, allowed, order):
        """Bland's rule on the reduced-cost row ``cost`` = [vector, -value]."""
        while True:
            q = next((s for s in order if s in allowed and cost[0][s] < 0), None)
            if q is None:
                return "optimal"
            best = None
            for i, row in enumerate(self.A):
                if row[q] > 0:
                    ratio = self.b[i] / row[q]
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return "unbounded"
            self.pivot(best[1], q, [cost] + self.extra)


class _FloatTableau:
    def __init__(self, A, b, basis):
        self.A = np.array(A, dtype=float)
        self.b = np.array(b, dtype=float)
        self.basis = basis
        self.pivots = 0

    def pivot(self, r, q, cost_rows):
        A, b = self.A, self.b
        piv = A[r, q]
        A[r] /= piv
        b[r] /= piv
        col = A[:, q].copy()
        col[r] = 0
        nz = np.nonzero(np.abs(col) > 0)[0]
        if len(nz):
            A[nz] -= np.outer(col[nz], A[r])
            b[nz] -= col[nz] * b[r]
        for crow in cost_rows:
            f = crow[0][q]
            if f:
                crow[0] -= f * A[r]
                crow[1] -= f * b[r]
        self.basis[r] = q
        self.pivots += 1
        if not (np.isfinite(b).all() and np.isfinite(A[r]).all()):
            raise SolverError("non-finite value in float tableau")

    def run(self, cost, allowed, order):
        mask = np.zeros(self.A.shape[1], dtype=bool)
        mask[list(allowed)] = True
        rank = np.empty(self.A.shape[1], dtype=int)
        rank[order] = np.arange(len(order))
        degenerate = 0
        while True:
            red = np.where(mask, cost[0], 0.0)
            cand = np.nonzero(red < -PIVOT_TOL)[0]
            if len(cand) == 0:
                return "optimal"
            if degenerate > 50:  # Bland fallback against cycling
                q = cand[np.argmin(rank[cand])]
            else:
                q = cand[np.argmin(red[cand])]
            col = self.A[:, q]
            rows = np.nonzero(col > PIVOT_TOL)[0]
            if len(rows) == 0:
                return "unbounded"
            ratios = self.b[rows] / col[rows]
            low = ratios.min()
            tied = rows[ratios <= low + 1e-12]
            r = min(tied, key=lambda i: self.basis[i])
            degenerate = degenerate + 1 if low <= 1e-12 else 0
            self.pivot(r, q, [cost] + self.extra)


def _tableau_solve(lp, mode, warm_start):
    num = Fraction if mode == "rational" else float
    A, b, cost, basis, artificial, back, width = _standard_form(lp, num)
    m = len(A)
    order = _priority_order(lp, back, width, warm_start) + sorted(artificial)
    if mode == "rational":
        tab = _RationalTableau(A, b, basis)
        zero = Fraction(0)
        red2 = [list(cost), zero]
    else:
        tab = _FloatTableau(A, b, basis)
        zero = 0.0
        red2 = [np.array(cost, dtype=float), 0.0]
    # phase-two costs are kept reduced alongside phase one
    for i, q in enumerate(tab.basis):
        f = red2[0][q]
        if f:
            red2[0] = (red2[0] - f * tab.A[i]) if mode == "float" else [c - f * a for c, a in zip(red2[0], tab.A[i])]
            red2[1] -= f * tab.b[i]
    tab.extra = []
    if artificial:
        red1 = [[zero] * len(cost), zero] if mode == "rational" else [np.zeros(len(cost)), 0.0]
        for s in artificial:
            red1[0][s] = num(1)
        for i, q in enumerate(tab.basis):
            if q in artificial:
                if mode == "rational":
                    red1[0] = [c - a for c, a in zip(red1[0], tab.A[i])]
                else:
                    red1[0] = red1[0] - tab.A[i]
                red1[1] -= tab.b[i]
        tab.extra = [red2]
        tab.run(red1, set(range(width)) | artificial, order)
        infeas = -red1[1]
        if (infeas > 0) if mode == "rational" else (infeas > 1e-7):
            return LpOutcome("infeasible", None, None, mode, "tableau", pivots=tab.pivots)
        # drive remaining artificials out of the basis
        for i in range(m):
            if tab.basis[i] in artificial:
                row = tab.A[i]
                q = next((s for s in range(width)
                          if (row[s] != 0 if mode == "rational" else abs(row[s]) > PIVOT_TOL)), None)
                if q is not None:
                    tab.pivot(i, q, [red2])
    tab.extra = []
    allowed = set(range(width))
    status = tab.run(red2, allowed, order)
    if status == "unbounded":
        return LpOutcome("unbounded", None, None, mode, "tableau", pivots=tab.pivots)
    xs = [zero] * len(cost)
    for i, q in enumerate(tab.basis):
        xs[q] = tab.b[i]
    x = [zero] * lp.num_columns
    for s, (j, sign) in enumerate(back):
        x[j] += sign * xs[s]
    if mode == "float":
        x = [float(v) for v in x]
    obj = sum((num(a) * x[j] for j, a in lp.objective.items()), zero)
    return LpOutcome("optimal", tuple(x), obj, mode, "tableau", pivots=tab.pivots)


# --------------------------------------------------------------------------
# HiGHS backend and exact certification


def _highs_solve(lp):
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix

    n = lp.num_columns
    ub_r, ub_c, ub_v, b_ub, ub_rows = [], [], [], [], []
    eq_r, eq_c, eq_v, b_eq, eq_rows = [], [], [], [], []
    for i, row in enumerate(lp.rows):
        if row.rel == EQ:
            k = len(b_eq)
            for j, a in row.coeffs:
                eq_r.append(k), eq_c.append(j), eq_v.append(float(a))
            b_eq.append(float(row.rhs))
            eq_rows.append(i)
        else:
            sign = 1.0 if row.rel == LE else -1.0
            k = len(b_ub)
            for j, a in row.coeffs:
                ub_r.append(k), ub_c.append(j), ub_v.append(sign * float(a))
            b_ub.append(sign * float(row.rhs))
            ub_rows.append((i, sign))
    c = np.zeros(n)
    for j, a in lp.objective.items():
        c[j] = float(a)
    kwargs = {}
    if b_ub:
        kwargs["A_ub"] = coo_matrix((ub_v, (ub_r, ub_c)), shape=(len(b_ub), n)).tocsr()
        kwargs["b_ub"] = np.array(b_ub)
    if b_eq:
        kwargs["A_eq"] = coo_matrix((eq_v, (eq_r, eq_c)), shape=(len(b_eq), n)).tocsr()
        kwargs["b_eq"] = np.array(b_eq)
    bounds = [(0, None) if lb is not None else (None, None) for lb in lp.lower]
    res = linprog(c, bounds=bounds, method="highs-ds", **kwargs)
    if res.status == 2:
        return "infeasible", None, None
    if res.status == 3:
        return "unbounded", None, None
    if res.status != 0:
        raise SolverError(f"HiGHS failed: {res.message}")
    duals = np.zeros(len(lp.rows))
    for k, (i, sign) in enumerate(ub_rows):
        duals[i] = sign * res.ineqlin.marginals[k]
    for k, i in enumerate(eq_rows):
        duals[i] = res.eqlin.marginals[k]
    return "optimal", np.asarray(res.x, dtype=float), duals


def solve_sparse_exact(equations, unknowns):
    """Solve sparse exact equations ``{col: coeff}, rhs`` for ``unknowns``.

    Returns ``(solution, determined)``: solution maps each unknown to a
    Fraction (undetermined ones set to 0) or None if the system is
    inconsistent; ``determined`` says whether the solution is unique.
    """
    unknowns = set(unknowns)
    rows = []
    for coeffs, rhs in equations:
        row = {j: Fraction(a) for j, a in coeffs.items() if a and j in unknowns}
        rows.append([row, Fraction(rhs)])
    occurs = {j: set() for j in unknowns}
    for i, (row, _) in enumerate(rows):
        for j in row:
            occurs[j].add(i)
    alive = set(range(len(rows)))
    pivots = []  # (row index, column)
    while True:
        best = None
        for i in alive:
            row = rows[i][0]
            if not row:
                continue
            size = len(row)
            if best is not None and (size - 1) * 1 >= best[0]:
                continue
            for j in row:
                cost = (size - 1) * (len(occurs[j]) - 1)
                if best is None or cost < best[0]:
                    best = (cost, i, j)
            if best[0] == 0:
                break
        if best is None:
            break
        _, r, q = best
        alive.discard(r)
        prow, prhs = rows[r]
        inv = 1 / prow[q]
        for j in prow:
            prow[j] *= inv
        prhs *= inv
        rows[r][1] = prhs
        for i in list(occurs[q]):
            if i == r or i not in alive:
                continue
            row = rows[i][0]
            f = row[q]
            for j, a in prow.items():
                v = row.get(j, 0) - f * a
                if v:
                    if j not in row:
                        occurs[j].add(i)
                    row[j] = v
                elif j in row:
                    del row[j]
                    occurs[j].discard(i)
            rows[i][1] -= f * prhs
        for j in prow:
            occurs[j].discard(r)
        pivots.append((r, q))
    for i in alive:
        if not rows[i][0] and rows[i][1] != 0:
            return None, False
    sol = {j: Fraction(0) for j in unknowns}
    for r, q in reversed(pivots):
        row, rhs = rows[r]
        sol[q] = rhs - sum((a * sol[j] for j, a in row.items() if j != q), Fraction(0))
    return sol, len(pivots) == len(unknowns)


def _certify(lp, xf, uf):
    """Rebuild an exact primal/dual optimal pair from a float optimum."""
    n = lp.num_columns
    rows = lp.rows
    support = [j for j in range(n) if abs(xf[j]) > 1e-9]
    act = np.zeros(len(rows))
    for i, row in enumerate(rows):
        act[i] = sum(float(a) * xf[j] for j, a in row.coeffs)
    tight = [i for i, row in enumerate(rows)
             if row.rel == EQ or abs(act[i] - float(row.rhs)) <= 1e-7 * (1 + abs(float(row.rhs)))]
    eqs = [(dict(rows[i].coeffs), rows[i].rhs) for i in tight]
    x_sol, _ = solve_sparse_exact(eqs, support)
    if x_sol is None:
        return None
    x = [x_sol.get(j, Fraction(0)) for j in range(n)]
    for j in range(n):
        if lp.lower[j] is not None and x[j] < lp.lower[j]:
            return None
    for row in rows:
        v = row.value(x)
        if (row.rel == EQ and v != row.rhs) or (row.rel == LE and v > row.rhs) or (row.rel == GE and v < row.rhs):
            return None
    # dual: c_j - sum_i a_ij u_i = d_j with d_j = 0 on columns in play
    cols = {j: [] for j in range(n)}
    for i, row in enumerate(rows):
        for j, a in row.coeffs:
            cols[j].append((i, a))
    cvec = np.zeros(n)
    for j, a in lp.objective.items():
        cvec[j] = float(a)
    red = cvec.copy()
    for j in range(n):
        red[j] -= sum(float(a) * uf[i] for i, a in cols[j])
    active_rows = [i for i in range(len(rows)) if abs(uf[i]) > 1e-9]
    zero_cols = [j for j in range(n) if abs(red[j]) <= 1e-7 or lp.lower[j] is None or x[j] != 0]
    active_set = set(active_rows)
    deqs = [({i: a for i, a in cols[j] if i in active_set}, lp.objective.get(j, 0)) for j in zero_cols]
    u_sol, _ = solve_sparse_exact(deqs, active_rows)
    if u_sol is None:
        return None
    u = [u_sol.get(i, Fraction(0)) for i in range(len(rows))]
    for i, row in enumerate(rows):
        if (row.rel == LE and u[i] > 0) or (row.rel == GE and u[i] < 0):
            return None
    for j in range(n):
        d = Fraction(lp.objective.get(j, 0)) - sum((a * u[i] for i, a in cols[j]), Fraction(0))
        if (lp.lower[j] is None and d != 0) or d < 0:
            return None
    primal = sum((Fraction(a) * x[j] for j, a in lp.objective.items()), Fraction(0))
    dual = sum((Fraction(row.rhs) * u[i] for i, row in enumerate(rows)), Fraction(0))
    dual += sum((Fraction(lb) * (Fraction(lp.objective.get(j, 0)) - sum((a * u[i] for i, a in cols[j]), Fraction(0)))
                 for j, lb in enumerate(lp.lower) if lb), Fraction(0))
    if primal != dual:
        return None
    return x, u, primal


def solve(lp, mode="rational", warm_start=None, backend="auto"):
    """Minimize ``lp``; ``mode`` is "rational" (exact) or "float".

    ``backend`` is "tableau", "highs" or "auto" (tableau for small programs).
    ``warm_start`` is a feasible point or a list of column ids whose columns
    get pricing priority; it never changes the optimal value.
    """
    if mode not in ("rational", "float"):
        raise ValueError(f"unknown arithmetic mode {mode!r}")
    lp.validate()
    if backend == "auto":
        size = (len(lp.rows) + 1) * (lp.num_columns + 2 * len(lp.rows))
        backend = "tableau" if size <= DENSE_LIMIT else "highs"
    if backend == "tableau":
        return _tableau_solve(lp, mode, warm_start)
    if backend != "highs":
        raise ValueError(f"unknown backend {backend!r}")
    status, xf, uf = _highs_solve(lp)
    if status == "infeasible" and lp.objective:
        # HiGHS may report an unbounded program as infeasible; ask again
        probe = LinearProgram(lp.column_ids, lp.lower, lp.rows, {})
        if _highs_solve(probe)[0] == "optimal":
            status = "unbounded"
    if status != "optimal":
        return LpOutcome(status, None, None, mode, "highs")
    if mode == "float":
        obj = float(sum(float(a) * xf[j] for j, a in lp.objective.items()))
        return LpOutcome("optimal", tuple(float(v) for v in xf), obj, mode, "highs", tuple(uf))
    cert = _certify(lp, xf, uf)
    if cert is None:
        raise SolverError("could not certify the float optimum exactly")
    x, u, obj = cert
    return LpOutcome("optimal", tuple(x), obj, mode, "highs+exact", tuple(u))


def dual_program(lp):
    """The LP dual, written as a minimization over one column per primal row.

    ``<=`` rows get a nonpositive multiplier, stored negated as a
    nonnegative column; ``=`` rows get a free column.
    """
    m = len(lp.rows)
    ids = [f"u{i}" for i in range(m)]
    lower = [None if row.rel == EQ else 0 for row in lp.rows]
    sign = [(-1 if row.rel == LE else 1) for row in lp.rows]
    dual = LinearProgram(ids, lower)
    dual.objective = {i: -sign[i] * row.rhs for i, row in enumerate(lp.rows) if row.rhs != 0}
    cols = {j: {} for j in range(lp.num_columns)}
    for i, row in enumerate(lp.rows):
        for j, a in row.coeffs:
            cols[j][i] = sign[i] * a
    for j in range(lp.num_columns):
        rel = EQ if lp.lower[j] is None else LE
        dual.add_row(cols[j], rel, lp.objective.get(j, 0))
    return dual


def check_solution(lp, outcome, with_dual=None):
    """Row residuals, bound violations and (float mode) the duality gap."""
    if outcome.status != "optimal":
        raise ValueError("only optimal outcomes can be checked")
    x = outcome.values
    worst_row = 0
    for row in lp.rows:
        v = row.value(x) - row.rhs
        if row.rel == EQ:
            res = abs(v)
        elif row.rel == LE:
            res = max(v, 0)
        else:
            res = max(-v, 0)
        worst_row = max(worst_row, res)
    worst_bound = max([max(lb - x[j], 0) for j, lb in enumerate(lp.lower) if lb is not None] + [0])
    gap = None
    if with_dual is None:
        with_dual = outcome.mode == "float"
    if with_dual:
        dual = solve(dual_program(lp), mode=outcome.mode)
        if dual.status == "optimal":
            gap = outcome.objective + dual.objective
    return ResidualReport(worst_row, worst_bound, gap)
