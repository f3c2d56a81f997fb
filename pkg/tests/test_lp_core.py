import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from invfor.errors import MalformedProblem
from invfor.lp_core import (
    EQ, GE, LE, LpBuilder, LpProblem, Status, dump_lp, load_lp, residual_report, solve_lp,
)

METHODS = ["highs", "simplex"]


def _single(sense, cost, lower, upper, rows):
    b = LpBuilder(sense)
    b.add_variable("x", lower, upper, cost)
    for coef, rel, rhs in rows:
        b.add_row({0: coef}, rel, rhs)
    return b.build()


@pytest.mark.parametrize("method", METHODS)
def test_bound_active_minimum(method):
    sol = solve_lp(_single("min", 1.0, 0.0, 10.0, [(1.0, GE, 3.0)]), method)
    assert sol.status is Status.OPTIMAL
    assert sol.x[0] == pytest.approx(3.0, abs=1e-9)
    assert sol.objective_value == pytest.approx(3.0, abs=1e-9)


@pytest.mark.parametrize("method", METHODS)
def test_degenerate_face(method):
    b = LpBuilder("max")
    x = b.add_variable("x", cost=1.0)
    y = b.add_variable("y", cost=1.0)
    b.add_row({x: 1.0, y: 1.0}, LE, 1.0)
    sol = solve_lp(b.build(), method)
    assert sol.optimal
    assert sol.objective_value == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("method", METHODS)
def test_infeasible(method):
    sol = solve_lp(_single("min", 1.0, 0.0, math.inf, [(1.0, LE, -1.0)]), method)
    assert sol.status is Status.INFEASIBLE


@pytest.mark.parametrize("method", METHODS)
def test_unbounded(method):
    sol = solve_lp(_single("max", 1.0, 0.0, math.inf, []), method)
    assert sol.status is Status.UNBOUNDED


@pytest.mark.parametrize("method", METHODS)
def test_free_and_negative_bounds(method):
    # min |x - 2| written with a free variable and an epigraph
    b = LpBuilder("min")
    x = b.add_variable("x", -math.inf, math.inf)
    t = b.add_variable("t", cost=1.0)
    b.add_row({t: 1.0, x: -1.0}, GE, -2.0)
    b.add_row({t: 1.0, x: 1.0}, GE, 2.0)
    b.add_row({x: 1.0}, EQ, 2.0)
    sol = solve_lp(b.build(), method)
    assert sol.optimal
    assert sol[x] == pytest.approx(2.0, abs=1e-9)
    assert sol.objective_value == pytest.approx(0.0, abs=1e-9)


# -- vertex enumeration oracle ------------------------------------------------


def _random_lp(rng, m, n):
    """max c'x, A x <= b, 0 <= x, with A >= 0 so the region is bounded."""
    A = rng.uniform(0.1, 1.0, (m, n))
    b = rng.uniform(1.0, 5.0, m)
    c = rng.normal(0.0, 1.0, n)
    return A, b, c


def _to_problem(A, b, c):
    bld = LpBuilder("max")
    cols = bld.add_variables("x", A.shape[1], cost=c)
    for i in range(A.shape[0]):
        bld.add_row(dict(zip(cols.tolist(), A[i])), LE, b[i])
    return bld.build()


def _vertex_oracle(A, b, c):
    """Best objective over all basic feasible points of {A x <= b, x >= 0}."""
    m, n = A.shape
    H = np.vstack([A, -np.eye(n)])
    h = np.concatenate([b, np.zeros(n)])
    best = -math.inf
    for active in itertools.combinations(range(m + n), n):
        M = H[list(active)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, h[list(active)])
        if np.all(H @ x <= h + 1e-9):
            best = max(best, float(c @ x))
    return best


@pytest.mark.parametrize("seed", range(25))
@pytest.mark.parametrize("method", METHODS)
def test_matches_vertex_enumeration(seed, method):
    rng = np.random.default_rng(seed)
    A, b, c = _random_lp(rng, 6, 4)
    sol = solve_lp(_to_problem(A, b, c), method)
    assert sol.optimal
    oracle = _vertex_oracle(A, b, c)
    assert sol.objective_value == pytest.approx(oracle, rel=1e-6, abs=1e-6)


def _dual_problem(A, b, c):
    """min b'y, A'y >= c, y >= 0."""
    bld = LpBuilder("min")
    cols = bld.add_variables("y", A.shape[0], cost=b)
    for j in range(A.shape[1]):
        bld.add_row(dict(zip(cols.tolist(), A[:, j])), GE, c[j])
    return bld.build()


@pytest.mark.parametrize("seed", range(10))
def test_dense_20x20_duality_certificate(seed):
    # Too many bases to enumerate: certify optimality by a primal point and a
    # dual point, from different backends, with equal objectives.
    rng = np.random.default_rng(1000 + seed)
    A, b, c = _random_lp(rng, 20, 20)
    primal = solve_lp(_to_problem(A, b, c), "highs")
    dual = solve_lp(_dual_problem(A, b, c), "simplex")
    assert primal.optimal and dual.optimal
    assert np.all(A @ primal.x <= b + 1e-7) and np.all(primal.x >= -1e-9)
    assert np.all(A.T @ dual.x >= c - 1e-7) and np.all(dual.x >= -1e-9)
    assert primal.objective_value == pytest.approx(dual.objective_value, rel=1e-7, abs=1e-7)
    own = solve_lp(_to_problem(A, b, c), "simplex")
    assert own.objective_value == pytest.approx(primal.objective_value, rel=1e-7)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.integers(1, 6))
def test_backends_agree_on_status_and_value(seed, m, n):
    rng = np.random.default_rng(seed)
    A = rng.normal(0.0, 1.0, (m, n))
    b = rng.normal(0.0, 2.0, m)
    c = rng.normal(0.0, 1.0, n)
    bld = LpBuilder("min")
    cols = bld.add_variables("x", n, lower=-3.0, upper=rng.choice([3.0, math.inf], n), cost=c)
    rels = rng.choice([LE, GE, EQ], m, p=[0.45, 0.45, 0.1])
    for i in range(m):
        bld.add_row(dict(zip(cols.tolist(), A[i])), rels[i], b[i])
    prob = bld.build()
    ref, own = solve_lp(prob, "highs"), solve_lp(prob, "simplex")
    assert ref.status is own.status
    if ref.optimal:
        assert own.objective_value == pytest.approx(ref.objective_value, rel=1e-7, abs=1e-7)
        assert residual_report(prob, own.x).ok()


@pytest.mark.parametrize("method", METHODS)
def test_deterministic(method):
    rng = np.random.default_rng(7)
    prob = _to_problem(*_random_lp(rng, 12, 10))
    a, b = solve_lp(prob, method), solve_lp(prob, method)
    assert a.status is b.status
    assert a.objective_value == b.objective_value
    assert np.array_equal(a.x, b.x)


def test_residual_report_certifies_optimum():
    rng = np.random.default_rng(3)
    prob = _to_problem(*_random_lp(rng, 15, 15))
    sol = solve_lp(prob)
    rep = residual_report(prob, sol.x)
    assert rep.max_residual < 1e-7
    assert rep.objective_value == pytest.approx(sol.objective_value)
    bad = residual_report(prob, sol.x + 10.0)
    assert not bad.ok()


def test_dump_load_round_trip():
    b = LpBuilder("max")
    x = b.add_variable("x", -math.inf, 4.5, 1.25)
    y = b.add_variable("y", 0.0, math.inf, -0.1)
    b.add_row({x: 1.0, y: 2.0}, LE, 3.0)
    b.add_row({y: 1.0}, GE, 0.5)
    b.add_row({x: 1.0, y: -1.0}, EQ, 0.1)
    prob = b.build()
    text = dump_lp(prob)
    back = load_lp(text)
    assert back.names == prob.names
    assert back.relations == prob.relations
    assert np.array_equal(back.objective, prob.objective)
    assert np.array_equal(back.lower, prob.lower) and np.array_equal(back.upper, prob.upper)
    assert (back.matrix != prob.matrix).nnz == 0
    assert dump_lp(back) == text


def test_coo_rows_sum_duplicates():
    b = LpBuilder("min")
    cols = b.add_variables("x", 2, cost=[1.0, 1.0])
    b.add_rows([0, 0, 0], [cols[0], cols[0], cols[1]], [0.5, 0.5, 1.0], GE, [2.0])
    prob = b.build()
    assert prob.constraint_rows() == [({"x[0]": 1.0, "x[1]": 1.0}, GE, 2.0)]


def test_rejects_unknown_variable():
    b = LpBuilder("min")
    b.add_variable("x")
    b.add_row({3: 1.0}, LE, 1.0)
    with pytest.raises(MalformedProblem):
        b.build()


def test_rejects_nan_coefficient():
    b = LpBuilder("min")
    b.add_variable("x", cost=float("nan"))
    with pytest.raises(MalformedProblem):
        b.build()


def test_rejects_bad_sense_and_relation():
    with pytest.raises(MalformedProblem):
        LpBuilder("maximize").build()
    b = LpBuilder("min")
    b.add_variable("x")
    b.add_row({0: 1.0}, "<", 1.0)
    with pytest.raises(MalformedProblem):
        b.build()


def test_rejects_explicit_zero_in_direct_construction():
    import scipy.sparse as sp
    m = sp.csr_matrix((np.array([0.0]), (np.array([0]), np.array([0]))), shape=(1, 1))
    with pytest.raises(MalformedProblem):
        LpProblem("min", np.zeros(1), m, (LE,), np.ones(1), np.zeros(1), np.ones(1), ("x",))


def test_concurrent_solves_are_independent():
    from concurrent.futures import ThreadPoolExecutor
    probs = [_to_problem(*_random_lp(np.random.default_rng(s), 8, 8)) for s in range(8)]
    serial = [solve_lp(p, "simplex").objective_value for p in probs]
    with ThreadPoolExecutor(4) as pool:
        threaded = list(pool.map(lambda p: solve_lp(p, "simplex").objective_value, probs))
    assert threaded == serial
