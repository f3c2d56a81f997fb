"""Sparse linear programs and their exact solution.

Every optimization in the package (reconstruction problem, bound and utility
estimation, building EMPC) is expressed as an :class:`LpProblem` and solved
with :func:`solve_lp`.  Two backends are available:

``"highs"``
    The HiGHS dual/primal simplex shipped with SciPy.  Used by default; it
    handles the large sparse estimation problems (tens of thousands of
    columns) in seconds.
``"simplex"``
    A dense two-phase bounded-variable primal simplex with Bland's rule,
    implemented here.  Slow but dependency-free and fully deterministic; it
    serves as an independent cross-check for small instances.

Both return an :class:`LpSolution` whose status is one of ``Optimal``,
``Infeasible`` or ``Unbounded``.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import MalformedProblem, SolverFailure

FEAS_TOL = 1e-7
OPT_TOL = 1e-7

LE, EQ, GE = "<=", "=", ">="
_RELATIONS = (LE, EQ, GE)


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class LpProblem:
    """A linear program ``opt c'x  s.t.  A x (rel) rhs,  lower <= x <= upper``.

    ``relations`` holds one of ``"<="``, ``"="``, ``">="`` per row.  Use
    :class:`LpBuilder` rather than constructing this directly.
    """

    sense: str
    objective: np.ndarray
    matrix: sp.csr_matrix
    relations: tuple[str, ...]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        validate(self)

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self.relations)

    def index(self, name: str) -> int:
        try:
            return self._name_index[name]
        except AttributeError:
            object.__setattr__(self, "_name_index", {n: i for i, n in enumerate(self.names)})
            return self._name_index[name]

    def objective_coefficients(self) -> dict[str, float]:
        return {self.names[j]: float(v) for j, v in enumerate(self.objective) if v != 0.0}

    def constraint_rows(self) -> list[tuple[dict[str, float], str, float]]:
        rows = []
        for i in range(self.n_rows):
            lo, hi = self.matrix.indptr[i], self.matrix.indptr[i + 1]
            row = {self.names[j]: float(v) for j, v in
                   zip(self.matrix.indices[lo:hi], self.matrix.data[lo:hi])}
            rows.append((row, self.relations[i], float(self.rhs[i])))
        return rows


def validate(problem: LpProblem) -> None:
    """Raise :class:`MalformedProblem` unless ``problem`` is well formed."""
    n = len(problem.names)
    if problem.sense not in ("min", "max"):
        raise MalformedProblem(f"objective sense must be 'min' or 'max', got {problem.sense!r}")
    if len(set(problem.names)) != n:
        raise MalformedProblem("duplicate variable names in registry")
    for label, arr in (("objective", problem.objective), ("lower", problem.lower),
                       ("upper", problem.upper)):
        if arr.shape != (n,):
            raise MalformedProblem(f"{label} has shape {arr.shape}, expected ({n},)")
    m = len(problem.relations)
    if problem.matrix.shape != (m, n):
        raise MalformedProblem(f"constraint matrix has shape {problem.matrix.shape}, expected {(m, n)}")
    if problem.rhs.shape != (m,):
        raise MalformedProblem("rhs length does not match the number of rows")
    bad = [r for r in problem.relations if r not in _RELATIONS]
    if bad:
        raise MalformedProblem(f"unknown relation {bad[0]!r}")
    if np.isnan(problem.objective).any() or not np.isfinite(problem.objective).all():
        raise MalformedProblem("objective has NaN or infinite coefficient")
    if not np.isfinite(problem.matrix.data).all():
        raise MalformedProblem("constraint matrix has NaN or infinite coefficient")
    if not np.isfinite(problem.rhs).all():
        raise MalformedProblem("rhs has NaN or infinite entry")
    if np.isnan(problem.lower).any() or np.isnan(problem.upper).any():
        raise MalformedProblem("variable bound is NaN (every variable needs a bounds entry)")
    if np.isposinf(problem.lower).any() or np.isneginf(problem.upper).any():
        raise MalformedProblem("lower bound of +inf or upper bound of -inf")
    if (problem.matrix.data == 0).any():
        raise MalformedProblem("constraint rows contain explicit zeros")


class LpBuilder:
    """Incremental, index-based construction of an :class:`LpProblem`.

    Variables are registered by name and addressed by integer column index.
    Rows may be added one at a time from a ``{column: coefficient}`` mapping or
    in bulk from COO triplets, which is what the estimation code does for its
    large problems.
    """

    def __init__(self, sense: str = "min"):
        self.sense = sense
        self._names: list[str] = []
        self._cost: list[float] = []
        self._lower: list[float] = []
        self._upper: list[float] = []
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._rel: list[str] = []
        self._rhs: list[float] = []

    @property
    def n_vars(self) -> int:
        return len(self._names)

    @property
    def n_rows(self) -> int:
        return len(self._rel)

    def add_variable(self, name: str, lower: float = 0.0, upper: float = math.inf,
                     cost: float = 0.0) -> int:
        self._names.append(name)
        self._cost.append(float(cost))
        self._lower.append(float(lower))
        self._upper.append(float(upper))
        return len(self._names) - 1

    def add_variables(self, prefix: str, count: int, lower=0.0, upper=math.inf,
                      cost=0.0) -> np.ndarray:
        """Add ``count`` variables named ``prefix[i]``; scalars broadcast."""
        start = len(self._names)
        self._names.extend(f"{prefix}[{i}]" for i in range(count))
        self._cost.extend(np.broadcast_to(np.asarray(cost, float), (count,)).tolist())
        self._lower.extend(np.broadcast_to(np.asarray(lower, float), (count,)).tolist())
        self._upper.extend(np.broadcast_to(np.asarray(upper, float), (count,)).tolist())
        return np.arange(start, start + count)

    def add_row(self, coeffs: Mapping[int, float], relation: str, rhs: float) -> int:
        cols = np.fromiter(coeffs.keys(), dtype=np.int64, count=len(coeffs))
        vals = np.fromiter(coeffs.values(), dtype=float, count=len(coeffs))
        row = self.n_rows
        self._rows.append(np.full(len(cols), row, dtype=np.int64))
        self._cols.append(cols)
        self._vals.append(vals)
        self._rel.append(relation)
        self._rhs.append(float(rhs))
        return row

    def add_rows(self, rows, cols, vals, relation: str | Sequence[str], rhs) -> np.ndarray:
        """Add a block of rows from COO triplets with *local* row indices.

        Duplicate ``(row, col)`` entries are summed when the problem is built.
        """
        rhs = np.atleast_1d(np.asarray(rhs, float))
        start = self.n_rows
        self._rows.append(np.asarray(rows, dtype=np.int64) + start)
        self._cols.append(np.asarray(cols, dtype=np.int64))
        self._vals.append(np.asarray(vals, dtype=float))
        if isinstance(relation, str):
            self._rel.extend([relation] * len(rhs))
        else:
            self._rel.extend(relation)
        self._rhs.extend(rhs.tolist())
        return np.arange(start, start + len(rhs))

    def build(self) -> LpProblem:
        n, m = self.n_vars, self.n_rows
        if self._rows:
            r = np.concatenate(self._rows)
            c = np.concatenate(self._cols)
            v = np.concatenate(self._vals)
        else:
            r = c = np.zeros(0, dtype=np.int64)
            v = np.zeros(0)
        if len(c) and (c.min() < 0 or c.max() >= n):
            raise MalformedProblem("constraint references a variable missing from the registry")
        if np.isnan(v).any():
            raise MalformedProblem("constraint matrix has NaN coefficient")
        matrix = sp.csr_matrix((v, (r, c)), shape=(m, n))
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        matrix.sort_indices()
        return LpProblem(
            sense=self.sense,
            objective=np.asarray(self._cost, float),
            matrix=matrix,
            relations=tuple(self._rel),
            rhs=np.asarray(self._rhs, float),
            lower=np.asarray(self._lower, float),
            upper=np.asarray(self._upper, float),
            names=tuple(self._names),
        )


@dataclass
class LpSolution:
    status: Status
    x: np.ndarray = field(repr=False)
    objective_value: float
    names: tuple[str, ...] = field(repr=False, default=())
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    @property
    def primal_values(self) -> dict[str, float]:
        return dict(zip(self.names, self.x.tolist()))

    def __getitem__(self, index):
        return self.x[index]


@dataclass(frozen=True)
class ResidualReport:
    """Feasibility certificate of a primal point."""

    max_bound_violation: float
    max_row_violation: float
    objective_value: float

    @property
    def max_residual(self) -> float:
        return max(self.max_bound_violation, self.max_row_violation)

    def ok(self, tol: float = FEAS_TOL) -> bool:
        return self.max_residual <= tol


def residual_report(problem: LpProblem, x: np.ndarray) -> ResidualReport:
    """Bound and row violations of ``x``; absolute, scaled by ``1 + |rhs|`` for rows."""
    x = np.asarray(x, float)
    bound = max(0.0, float(np.max(problem.lower - x, initial=0.0)),
                float(np.max(x - problem.upper, initial=0.0)))
    ax = problem.matrix @ x
    rel = np.asarray(problem.relations)
    diff = ax - problem.rhs
    viol = np.where(rel == LE, np.maximum(diff, 0.0),
                    np.where(rel == GE, np.maximum(-diff, 0.0), np.abs(diff)))
    viol = viol / (1.0 + np.abs(problem.rhs))
    return ResidualReport(bound, float(viol.max(initial=0.0)),
                          float(problem.objective @ x))


def solve_lp(problem: LpProblem, method: str = "highs") -> LpSolution:
    """Solve ``problem`` exactly.

    Raises :class:`SolverFailure` if the backend stops without classifying the
    instance (iteration limit, numerical trouble).
    """
    if method == "highs":
        return _solve_highs(problem)
    if method == "simplex":
        return _solve_simplex(problem)
    raise ValueError(f"unknown LP method {method!r}")


_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-9,
    "dual_feasibility_tolerance": 1e-9,
    "presolve": True,
}


def _split_rows(problem: LpProblem):
    rel = np.asarray(problem.relations)
    A = problem.matrix
    le = np.flatnonzero(rel == LE)
    ge = np.flatnonzero(rel == GE)
    eq = np.flatnonzero(rel == EQ)
    A_ub = b_ub = A_eq = b_eq = None
    if len(le) or len(ge):
        A_ub = sp.vstack([A[le], -A[ge]], format="csr")
        b_ub = np.concatenate([problem.rhs[le], -problem.rhs[ge]])
    if len(eq):
        A_eq = A[eq]
        b_eq = problem.rhs[eq]
    return A_ub, b_ub, A_eq, b_eq


def _solve_highs(problem: LpProblem) -> LpSolution:
    sign = -1.0 if problem.sense == "max" else 1.0
    n = problem.n_vars
    if n == 0:
        return _trivial(problem)
    A_ub, b_ub, A_eq, b_eq = _split_rows(problem)
    bounds = np.column_stack([problem.lower, problem.upper])
    bounds = [(None if np.isinf(lo) else lo, None if np.isinf(hi) else hi) for lo, hi in bounds]
    res = linprog(sign * problem.objective, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs-ds", options=_HIGHS_OPTIONS)
    if res.status == 0:
        x = np.asarray(res.x, float)
        return LpSolution(Status.OPTIMAL, x, float(problem.objective @ x), problem.names,
                          int(getattr(res, "nit", 0)))
    if res.status == 2:
        return LpSolution(Status.INFEASIBLE, np.full(n, np.nan), math.nan, problem.names)
    if res.status == 3:
        # HiGHS may report "unbounded" from presolve for instances that are
        # actually infeasible; settle it with a zero-objective phase-one solve.
        feas = linprog(np.zeros(n), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                       bounds=bounds, method="highs-ds", options=_HIGHS_OPTIONS)
        if feas.status == 2:
            return LpSolution(Status.INFEASIBLE, np.full(n, np.nan), math.nan, problem.names)
        val = math.inf if problem.sense == "max" else -math.inf
        return LpSolution(Status.UNBOUNDED, np.full(n, np.nan), val, problem.names)
    raise SolverFailure(f"HiGHS status {res.status}: {res.message}")


def _trivial(problem: LpProblem) -> LpSolution:
    ok = residual_report(problem, np.zeros(0)).ok()
    status = Status.OPTIMAL if ok else Status.INFEASIBLE
    return LpSolution(status, np.zeros(0), 0.0 if ok else math.nan, problem.names)


# ---------------------------------------------------------------------------
# Dense bounded-variable simplex (reference backend)
# ---------------------------------------------------------------------------

_PIV_TOL = 1e-9


def _solve_simplex(problem: LpProblem, max_iter: int = 50_000) -> LpSolution:
    n, m = problem.n_vars, problem.n_rows
    sign = -1.0 if problem.sense == "max" else 1.0
    A = problem.matrix.toarray()
    c = sign * problem.objective
    b = problem.rhs.astype(float).copy()
    lo, hi = problem.lower, problem.upper

    # Map every structural variable onto y >= 0 (possibly with finite upper):
    #   finite lower:            x = lo + y
    #   -inf lower, finite upper: x = hi - y
    #   free:                    x = y1 - y2
    cols: list[np.ndarray] = []
    costs: list[float] = []
    ubs: list[float] = []
    back: list[tuple[int, float]] = []  # (structural index, sign) per column
    offset = np.zeros(n)
    for j in range(n):
        a = A[:, j]
        if np.isfinite(lo[j]):
            offset[j] = lo[j]
            cols.append(a); costs.append(c[j]); ubs.append(hi[j] - lo[j]); back.append((j, 1.0))
        elif np.isfinite(hi[j]):
            offset[j] = hi[j]
            cols.append(-a); costs.append(-c[j]); ubs.append(math.inf); back.append((j, -1.0))
        else:
            cols.append(a); costs.append(c[j]); ubs.append(math.inf); back.append((j, 1.0))
            cols.append(-a); costs.append(-c[j]); ubs.append(math.inf); back.append((j, -1.0))
    if any(u < 0 for u in ubs):
        return LpSolution(Status.INFEASIBLE, np.full(n, np.nan), math.nan, problem.names)
    b = b - A @ offset
    n_struct = len(cols)

    # Slack per row: <= gets s >= 0, >= gets -s with s >= 0, = gets none.
    for i, rel in enumerate(problem.relations):
        if rel == EQ:
            continue
        e = np.zeros(m)
        e[i] = 1.0 if rel == LE else -1.0
        cols.append(e); costs.append(0.0); ubs.append(math.inf); back.append((-1, 0.0))

    M = np.column_stack(cols) if cols else np.zeros((m, 0))
    cost = np.asarray(costs, float)
    ub = np.asarray(ubs, float)
    flip = b < 0
    M[flip] *= -1.0
    b[flip] *= -1.0

    nz = M.shape[1]
    # Artificial columns make the identity the starting basis.
    T = np.hstack([M, np.eye(m)])
    ub_all = np.concatenate([ub, np.full(m, math.inf)])
    basis = list(range(nz, nz + m))
    at_upper = np.zeros(nz + m, dtype=bool)
    phase1_cost = np.concatenate([np.zeros(nz), np.ones(m)])

    iters = 0
    state, iters = _bounded_simplex(T, b, phase1_cost, ub_all, basis, at_upper, max_iter)
    xb = _basic_values(T, b, basis, at_upper, ub_all)
    full = _assemble(nz + m, basis, xb, at_upper, ub_all)
    if full[nz:].sum() > FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
        return LpSolution(Status.INFEASIBLE, np.full(n, np.nan), math.nan, problem.names, iters)

    # Artificials stay in the problem pinned to zero.
    ub_all[nz:] = 0.0
    phase2_cost = np.concatenate([cost, np.zeros(m)])
    state, it2 = _bounded_simplex(T, b, phase2_cost, ub_all, basis, at_upper, max_iter)
    iters += it2
    if state == "unbounded":
        val = math.inf if problem.sense == "max" else -math.inf
        return LpSolution(Status.UNBOUNDED, np.full(n, np.nan), val, problem.names, iters)

    xb = _basic_values(T, b, basis, at_upper, ub_all)
    full = _assemble(nz + m, basis, xb, at_upper, ub_all)
    x = offset.copy()
    for k in range(n_struct):
        j, s = back[k]
        x[j] += s * full[k]
    # Clean round-off against the original bounds.
    x = np.minimum(np.maximum(x, lo), hi)
    return LpSolution(Status.OPTIMAL, x, float(problem.objective @ x), problem.names, iters)


def _assemble(size, basis, xb, at_upper, ub):
    full = np.where(at_upper, ub, 0.0)
    full[np.isinf(full)] = 0.0
    full[basis] = xb
    return full


def _basic_values(T, b, basis, at_upper, ub):
    nonbasic_up = np.flatnonzero(at_upper)
    rhs = b - T[:, nonbasic_up] @ ub[nonbasic_up] if len(nonbasic_up) else b.copy()
    if not basis:
        return np.zeros(0)
    return np.linalg.solve(T[:, basis], rhs)


def _bounded_simplex(T, b, cost, ub, basis, at_upper, max_iter):
    """Primal simplex over ``T y = b, 0 <= y <= ub`` with Bland's rule.

    ``basis`` and ``at_upper`` are updated in place.  Returns
    ``("optimal" | "unbounded", iterations)``.
    """
    m, N = T.shape
    if m == 0:
        # Only bounds: each variable sits at whichever bound is cheaper.
        for j in range(N):
            if cost[j] < 0:
                if math.isinf(ub[j]):
                    return "unbounded", 0
                at_upper[j] = True
            else:
                at_upper[j] = False
        return "optimal", 0
    for it in range(max_iter):
        Bmat = T[:, basis]
        xb = _basic_values(T, b, basis, at_upper, ub)
        pi = np.linalg.solve(Bmat.T, cost[basis])
        d = cost - T.T @ pi
        in_basis = np.zeros(N, dtype=bool)
        in_basis[basis] = True
        eligible = (~in_basis) & (
            ((~at_upper) & (d < -OPT_TOL) & (ub > 0)) | (at_upper & (d > OPT_TOL))
        )
        cand = np.flatnonzero(eligible)
        if len(cand) == 0:
            return "optimal", it
        j = int(cand[0])
        direction = -1.0 if at_upper[j] else 1.0
        w = np.linalg.solve(Bmat, T[:, j])
        # Basic values move by -direction * theta * w.
        step = direction * w
        best = ub[j]  # bound flip of the entering column
        leave_pos = -1
        leave_to_upper = False
        for i in range(m):
            k = basis[i]
            if step[i] > _PIV_TOL:
                ratio = max(xb[i], 0.0) / step[i]
                to_upper = False
            elif step[i] < -_PIV_TOL and not math.isinf(ub[k]):
                ratio = max(ub[k] - xb[i], 0.0) / -step[i]
                to_upper = True
            else:
                continue
            if ratio < best - 1e-12 or (
                abs(ratio - best) <= 1e-12 and leave_pos >= 0 and k < basis[leave_pos]
            ):
                best, leave_pos, leave_to_upper = ratio, i, to_upper
        if math.isinf(best):
            return "unbounded", it
        if leave_pos < 0:
            at_upper[j] = not at_upper[j]
            continue
        k = basis[leave_pos]
        basis[leave_pos] = j
        at_upper[j] = False
        at_upper[k] = leave_to_upper
    raise SolverFailure(f"simplex iteration limit ({max_iter}) reached")


# ---------------------------------------------------------------------------
# Plain-text dump
# ---------------------------------------------------------------------------

_DUMP_HEADER = "# invfor-lp 1"


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def dump_lp(problem: LpProblem, stream: io.TextIOBase | None = None) -> str:
    """Write ``problem`` as an explicit row listing; see ``docs/lp_format.md``."""
    out = io.StringIO()
    out.write(f"{_DUMP_HEADER}\n")
    out.write(f"SENSE {problem.sense}\n")
    out.write(f"VARS {problem.n_vars}\n")
    for j, name in enumerate(problem.names):
        out.write(f"VAR {name} {_fmt(problem.lower[j])} {_fmt(problem.upper[j])} "
                  f"{_fmt(problem.objective[j])}\n")
    out.write(f"ROWS {problem.n_rows}\n")
    A = problem.matrix
    for i in range(problem.n_rows):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        terms = " ".join(f"{problem.names[j]}:{_fmt(v)}"
                         for j, v in zip(A.indices[lo:hi], A.data[lo:hi]))
        out.write(f"ROW {problem.relations[i]} {_fmt(problem.rhs[i])} {terms}".rstrip() + "\n")
    out.write("END\n")
    text = out.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def load_lp(lines: str | Iterable[str]) -> LpProblem:
    """Parse the output of :func:`dump_lp`."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    it = iter(line.rstrip("\n") for line in lines)
    if next(it, None) != _DUMP_HEADER:
        raise MalformedProblem("not an invfor LP dump")
    sense = next(it).split()[1]
    builder = LpBuilder(sense)
    index = {}
    n = int(next(it).split()[1])
    for _ in range(n):
        _, name, lo, hi, cost = next(it).split()
        index[name] = builder.add_variable(name, float(lo), float(hi), float(cost))
    m = int(next(it).split()[1])
    for _ in range(m):
        parts = next(it).split()
        coeffs = {}
        for term in parts[3:]:
            name, val = term.rsplit(":", 1)
            if name not in index:
                raise MalformedProblem(f"row references unknown variable {name!r}")
            coeffs[index[name]] = float(val)
        builder.add_row(coeffs, parts[1], float(parts[2]))
    if next(it, None) != "END":
        raise MalformedProblem("missing END marker")
    return builder.build()
