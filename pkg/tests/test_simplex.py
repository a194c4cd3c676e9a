import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from twsc.simplex import (EQ, GE, LE, LinearProgram, SolverError, check_solution, dual_program,
                          solve, solve_sparse_exact)

BACKENDS = [("rational", "tableau"), ("float", "tableau"), ("rational", "highs"), ("float", "highs")]


def two_var_lp():
    # min -x - y  s.t.  x + 2y <= 4,  3x + y <= 6; optimum at (8/5, 6/5)
    lp = LinearProgram(["x", "y"], [0, 0])
    lp.add_row({0: 1, 1: 2}, LE, Fraction(4))
    lp.add_row({0: 3, 1: 1}, LE, Fraction(6))
    lp.objective = {0: Fraction(-1), 1: Fraction(-1)}
    return lp


@pytest.mark.parametrize("mode,backend", BACKENDS)
def test_two_variable_vertex(mode, backend):
    out = solve(two_var_lp(), mode=mode, backend=backend)
    assert out.status == "optimal"
    if mode == "rational":
        assert out.values == (Fraction(8, 5), Fraction(6, 5))
        assert out.objective == Fraction(-14, 5)
    else:
        assert out.objective == pytest.approx(-2.8)


@pytest.mark.parametrize("mode,backend", BACKENDS)
def test_infeasible_and_unbounded(mode, backend):
    lp = LinearProgram(["x"], [0])
    lp.add_row({0: 1}, LE, Fraction(-1))
    assert solve(lp, mode=mode, backend=backend).status == "infeasible"
    lp = LinearProgram(["x", "y"], [0, None])
    lp.add_row({0: 1, 1: -1}, GE, Fraction(0))
    lp.objective = {0: Fraction(-1)}
    assert solve(lp, mode=mode, backend=backend).status == "unbounded"


def test_free_column_and_equality():
    # min x  s.t.  x - y = -3, 0 <= y <= 1, x free: x = y - 3 is smallest at y = 0
    lp = LinearProgram(["x", "y"], [None, 0])
    lp.add_row({0: 1, 1: -1}, EQ, Fraction(-3))
    lp.add_row({1: 1}, LE, Fraction(1))
    lp.objective = {0: Fraction(1)}
    for backend in ("tableau", "highs"):
        out = solve(lp, backend=backend)
        assert out.objective == -3 and out.values == (Fraction(-3), Fraction(0))


def test_warm_start_does_not_change_value():
    lp = two_var_lp()
    assert solve(lp, warm_start=["y"]).objective == solve(lp).objective


def test_dump_format():
    buf = io.StringIO()
    two_var_lp().dump(buf)
    lines = buf.getvalue().splitlines()
    assert lines[1] == "col 0 0 x"
    assert lines[3] == "obj 0:-1 1:-1"
    assert lines[4] == "row <= 4 0:1 1:2"


def test_undeclared_column_rejected():
    lp = LinearProgram(["x"], [0])
    with pytest.raises(ValueError):
        lp.add_row({3: 1}, LE, Fraction(1))
    with pytest.raises(ValueError):
        lp.add_row({0: 1}, "<", Fraction(1))


def test_sparse_exact_solver():
    sol, determined = solve_sparse_exact(
        [({"a": Fraction(1), "b": Fraction(1)}, Fraction(3)), ({"a": Fraction(1), "b": Fraction(-1)}, Fraction(1))],
        ["a", "b"])
    assert determined and sol == {"a": 2, "b": 1}
    sol, determined = solve_sparse_exact([({"a": Fraction(1), "b": Fraction(1)}, Fraction(3))], ["a", "b"])
    assert not determined


@st.composite
def random_lp(draw):
    m = draw(st.integers(1, 5))
    n = draw(st.integers(1, 5))
    coef = st.integers(-4, 4)
    lp = LinearProgram([f"x{j}" for j in range(n)],
                       [draw(st.sampled_from([0, 0, None])) for _ in range(n)])
    for _ in range(m):
        row = {j: Fraction(draw(coef)) for j in range(n)}
        lp.add_row(row, draw(st.sampled_from([LE, GE, EQ])), Fraction(draw(st.integers(-6, 6))))
    # a box keeps most programs bounded
    for j in range(n):
        if draw(st.booleans()):
            lp.add_row({j: 1}, LE, Fraction(draw(st.integers(0, 5))))
            lp.add_row({j: 1}, GE, Fraction(-5))
    lp.objective = {j: Fraction(draw(coef)) for j in range(n)}
    return lp


def scipy_reference(lp):
    n = lp.num_columns
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for row in lp.rows:
        a = np.zeros(n)
        for j, c in row.coeffs:
            a[j] = float(c)
        if row.rel == LE:
            A_ub.append(a), b_ub.append(float(row.rhs))
        elif row.rel == GE:
            A_ub.append(-a), b_ub.append(-float(row.rhs))
        else:
            A_eq.append(a), b_eq.append(float(row.rhs))
    c = np.array([float(lp.objective.get(j, 0)) for j in range(n)])
    bounds = [(0, None) if lb == 0 else (None, None) for lb in lp.lower]
    res = linprog(c, A_ub=A_ub or None, b_ub=b_ub or None, A_eq=A_eq or None, b_eq=b_eq or None,
                  bounds=bounds, method="highs")
    return {0: "optimal", 2: "infeasible", 3: "unbounded"}[res.status], res.fun


@given(random_lp())
def test_backends_agree_with_reference(lp):
    status, ref = scipy_reference(lp)
    for mode, backend in BACKENDS:
        out = solve(lp, mode=mode, backend=backend)
        assert out.status == status, (mode, backend)
        if status == "optimal":
            assert float(out.objective) == pytest.approx(ref, abs=1e-7)
            rep = check_solution(lp, out, with_dual=False)
            if mode == "rational":
                assert rep.max_row_residual == 0 and rep.max_bound_violation == 0


@given(random_lp())
def test_strong_duality_exact(lp):
    out = solve(lp)
    if out.status != "optimal":
        return
    dual = solve(dual_program(lp))
    assert dual.status == "optimal"
    assert out.objective == -dual.objective


def test_certification_failure_is_loud(monkeypatch):
    import twsc.simplex as S

    monkeypatch.setattr(S, "_certify", lambda lp, x, u: None)
    with pytest.raises(SolverError):
        solve(two_var_lp(), backend="highs")
