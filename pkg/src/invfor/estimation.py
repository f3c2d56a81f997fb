"""Two-step inverse-optimization estimator of the price-response model.

The estimator works in three stages:

1. :func:`fit_bounds` solves the bound-estimation LP.  The upper and lower
   load bounds are affine in the regressors; the penalty ``K`` trades load
   mass inside the interval against mass outside it.
2. :func:`adjust_and_split` clips the measured load into the fitted interval
   and distributes it over the load blocks in sequential order.
3. :func:`fit_utilities` solves the utility-estimation LP, which minimizes the
   total duality gap of the reconstruction problem over affine marginal
   utilities.

:func:`cross_validate_k` picks ``K`` by one-step-ahead validation RMSE.
"""

from __future__ import annotations

import hashlib
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import forward_model
from .data import TimeSeriesTable
from .errors import (
    ArityMismatch, ConfigError, InconsistentBounds, InsufficientHistory, SolverFailure,
)
from .forward_model import FIRST_BLOCK_OFFSET, BlockPartition, block_widths
from .lp_core import EQ, GE, LE, LpBuilder, Status, solve_lp

CV_TIE_RTOL = 1e-9
DEFAULT_K_GRID = tuple(round(0.05 * i, 2) for i in range(20)) + (0.98, 0.99)


# ---------------------------------------------------------------------------
# Regressors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegressorSpec:
    """Which regressors to build, in this fixed order.

    Hour indicators (24 one-hot rows), ambient temperature, solar irradiance,
    lagged load, lagged price.  The contemporaneous price is never a
    regressor: it acts only through the reconstruction problem.
    """

    hour_indicators: bool = True
    temperature: bool = True
    solar: bool = True
    load_lags: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    price_lags: tuple[int, ...] = (1, 2, 3, 4, 5, 6)

    def __post_init__(self):
        lags = tuple(self.load_lags) + tuple(self.price_lags)
        if any(int(l) != l or l < 1 for l in lags):
            raise ConfigError("regressor lags must be integers >= 1")
        object.__setattr__(self, "load_lags", tuple(int(l) for l in self.load_lags))
        object.__setattr__(self, "price_lags", tuple(int(l) for l in self.price_lags))

    @property
    def max_lag(self) -> int:
        return max(self.load_lags + self.price_lags, default=0)

    @property
    def names(self) -> list[str]:
        names = []
        if self.hour_indicators:
            names += [f"hour_{h:02d}" for h in range(24)]
        if self.temperature:
            names.append("temp_ambient")
        if self.solar:
            names.append("solar")
        names += [f"load_lag{l}" for l in self.load_lags]
        names += [f"price_lag{l}" for l in self.price_lags]
        return names

    @property
    def arity(self) -> int:
        return len(self.names)

    def to_text(self) -> str:
        parts = [
            f"hours={int(self.hour_indicators)}",
            f"temp={int(self.temperature)}",
            f"solar={int(self.solar)}",
            "load_lags=" + ";".join(map(str, self.load_lags)),
            "price_lags=" + ";".join(map(str, self.price_lags)),
        ]
        return ",".join(parts)

    @classmethod
    def from_text(cls, text: str) -> "RegressorSpec":
        fields = dict(item.split("=", 1) for item in text.split(","))

        def lags(s):
            return tuple(int(v) for v in s.split(";") if v)

        return cls(
            hour_indicators=fields.get("hours", "1") == "1",
            temperature=fields.get("temp", "1") == "1",
            solar=fields.get("solar", "1") == "1",
            load_lags=lags(fields.get("load_lags", "")),
            price_lags=lags(fields.get("price_lags", "")),
        )


@dataclass(frozen=True)
class RegressorMatrix:
    """``values[r, j]`` is regressor ``r`` for table row ``start + j``."""

    values: np.ndarray
    start: int
    names: list[str]

    @property
    def arity(self) -> int:
        return self.values.shape[0]

    def columns(self, rows: slice | np.ndarray) -> np.ndarray:
        """Regressor columns for table row indices ``rows``."""
        if isinstance(rows, slice):
            rows = np.arange(rows.start, rows.stop)
        rows = np.asarray(rows)
        if rows.size and rows.min() < self.start:
            raise InsufficientHistory(f"row {rows.min()} precedes the first usable row {self.start}")
        return self.values[:, rows - self.start]


def build_regressors(table: TimeSeriesTable, spec: RegressorSpec) -> RegressorMatrix:
    """Regressor matrix over every table row that has full lag history.

    The lag-``l`` load regressor at row ``t`` is ``load[t - l]``, so the load
    at ``t`` itself never enters column ``t``.
    """
    n = len(table)
    start = spec.max_lag
    if n <= start:
        raise InsufficientHistory(f"table has {n} rows, lags need more than {start}")
    if spec.load_lags and table.load is None:
        raise ConfigError("load lags requested but the table has no load column")
    rows = np.arange(start, n)
    out = []
    if spec.hour_indicators:
        hours = table.hours[rows]
        out.append((hours[None, :] == np.arange(24)[:, None]).astype(float))
    if spec.temperature:
        out.append(table.temp_ambient[rows][None, :])
    if spec.solar:
        out.append(table.solar[rows][None, :])
    for l in spec.load_lags:
        out.append(table.load[rows - l][None, :])
    for l in spec.price_lags:
        out.append(table.price[rows - l][None, :])
    values = np.vstack(out) if out else np.zeros((0, len(rows)))
    return RegressorMatrix(values, start, spec.names)


# ---------------------------------------------------------------------------
# Coefficient containers
# ---------------------------------------------------------------------------


def _columns(Z, arity: int) -> np.ndarray:
    """``Z`` as an ``(arity, T)`` array; a 1-D input is a single column."""
    Z = np.asarray(Z, float)
    if Z.ndim <= 1:
        return Z.reshape(arity, 1) if arity == 0 else Z.reshape(arity, -1)
    if Z.shape[0] != arity:
        raise ArityMismatch(f"regressor rows: got {Z.shape[0]}, model uses {arity}")
    return Z


@dataclass(frozen=True)
class BoundsCoefficients:
    mu_lo: float
    mu_hi: float
    alpha_lo: np.ndarray
    alpha_hi: np.ndarray

    @property
    def arity(self) -> int:
        return len(self.alpha_lo)

    def evaluate(self, Z) -> tuple[np.ndarray, np.ndarray]:
        Z = _columns(Z, self.arity)
        return self.mu_lo + self.alpha_lo @ Z, self.mu_hi + self.alpha_hi @ Z


@dataclass(frozen=True)
class UtilityCoefficients:
    mu_u: np.ndarray
    alpha_u: np.ndarray

    @property
    def arity(self) -> int:
        return len(self.alpha_u)

    @property
    def n_blocks(self) -> int:
        return len(self.mu_u)

    def evaluate(self, Z) -> np.ndarray:
        """Utilities ``u[b, t]``; the regressor shift is shared across blocks."""
        Z = _columns(Z, self.arity)
        return self.mu_u[:, None] + (self.alpha_u @ Z)[None, :]


@dataclass(frozen=True)
class FpSolution:
    coefficients: BoundsCoefficients
    xi_hi_plus: np.ndarray
    xi_lo_plus: np.ndarray
    xi_hi_minus: np.ndarray
    xi_lo_minus: np.ndarray
    pmin: np.ndarray
    pmax: np.ndarray
    objective: float


@dataclass(frozen=True)
class OpSolution:
    coefficients: UtilityCoefficients
    gaps: np.ndarray
    lam_lo: np.ndarray
    lam_hi: np.ndarray
    phi_lo: np.ndarray
    phi_hi: np.ndarray
    objective: float


def _require_optimal(sol, what: str):
    if sol.status is not Status.OPTIMAL:
        raise SolverFailure(f"{what} LP ended {sol.status.value}")


# ---------------------------------------------------------------------------
# Bound estimation
# ---------------------------------------------------------------------------


def fit_bounds(load, Z, K: float, method: str = "highs") -> FpSolution:
    """Fit affine lower/upper load bounds with penalty ``K``.

    Minimizes ``sum_t (1-K)(xi_hi+ + xi_lo+) + K(xi_hi- + xi_lo-)`` where the
    ``+`` slacks measure load inside the interval and the ``-`` slacks load
    outside it.  With no regressors the upper bound is a ``K``-quantile and
    the lower bound a ``(1-K)``-quantile of the load sample.
    """
    if not 0.0 <= K < 1.0:
        raise ValueError(f"K must lie in [0, 1), got {K}")
    x = np.asarray(load, float)
    T = len(x)
    Z = np.asarray(Z, float).reshape(-1, T)
    R = Z.shape[0]

    lp = LpBuilder("min")
    mu_lo = lp.add_variable("mu_lo", -math.inf, math.inf)
    mu_hi = lp.add_variable("mu_hi", -math.inf, math.inf)
    a_lo = lp.add_variables("alpha_lo", R, -math.inf, math.inf)
    a_hi = lp.add_variables("alpha_hi", R, -math.inf, math.inf)
    hp = lp.add_variables("xi_hi_plus", T, cost=1.0 - K)
    lpl = lp.add_variables("xi_lo_plus", T, cost=1.0 - K)
    hm = lp.add_variables("xi_hi_minus", T, cost=K)
    lm = lp.add_variables("xi_lo_minus", T, cost=K)

    t_idx = np.arange(T)
    zr = np.repeat(t_idx, R)          # row index per regressor entry (t-major)
    zv = Z.T.reshape(-1)              # Z[r, t] in t-major order
    ones = np.ones(T)

    def affine_row(mu, alpha, sign=1.0):
        rows = np.concatenate([t_idx, zr])
        cols = np.concatenate([np.full(T, mu), np.tile(alpha, T)])
        vals = sign * np.concatenate([ones, zv])
        return rows, cols, vals

    # pmax_t - xi_hi+ + xi_hi- = x_t
    r, c, v = affine_row(mu_hi, a_hi)
    lp.add_rows(np.concatenate([r, t_idx, t_idx]), np.concatenate([c, hp, hm]),
                np.concatenate([v, -ones, ones]), EQ, x)
    # pmin_t + xi_lo+ - xi_lo- = x_t
    r, c, v = affine_row(mu_lo, a_lo)
    lp.add_rows(np.concatenate([r, t_idx, t_idx]), np.concatenate([c, lpl, lm]),
                np.concatenate([v, ones, -ones]), EQ, x)
    # pmin_t - pmax_t <= 0
    r1, c1, v1 = affine_row(mu_lo, a_lo)
    r2, c2, v2 = affine_row(mu_hi, a_hi, -1.0)
    lp.add_rows(np.concatenate([r1, r2]), np.concatenate([c1, c2]),
                np.concatenate([v1, v2]), LE, np.zeros(T))
    # a-priori: pmin_t >= 0
    r, c, v = affine_row(mu_lo, a_lo)
    lp.add_rows(r, c, v, GE, np.zeros(T))

    sol = solve_lp(lp.build(), method)
    _require_optimal(sol, "bound estimation")
    s = sol.x
    coeffs = BoundsCoefficients(float(s[mu_lo]), float(s[mu_hi]), s[a_lo].copy(), s[a_hi].copy())
    pmin, pmax = coeffs.evaluate(Z)
    return FpSolution(coeffs, s[hp], s[lpl], s[hm], s[lm], pmin, pmax, sol.objective_value)


# ---------------------------------------------------------------------------
# Load adjustment
# ---------------------------------------------------------------------------


def adjust_and_split(load, pmin, pmax, n_blocks: int) -> tuple[np.ndarray, BlockPartition]:
    """Clip load into ``[pmin, pmax]`` and fill blocks from the first one up.

    Returns ``(blocks, partition)`` with ``blocks[b, t]`` the adjusted load of
    block ``b``; ``blocks.sum(axis=0)`` equals the clipped load.
    """
    if n_blocks < 2:
        raise ValueError("adjust_and_split needs at least two blocks")
    x = np.atleast_1d(np.asarray(load, float))
    pmin = np.atleast_1d(np.asarray(pmin, float))
    pmax = np.atleast_1d(np.asarray(pmax, float))
    adjusted = np.minimum(np.maximum(x, pmin), pmax)
    part = block_widths(pmin, pmax, n_blocks)
    E = part.widths
    blocks = np.zeros_like(E)
    remaining = adjusted.copy()
    for b in range(n_blocks):
        take = np.minimum(remaining, E[b])
        blocks[b] = take
        remaining = remaining - take
    # Round-off leftover from the equal split goes to the last block.
    blocks[-1] += remaining
    return blocks, part


# ---------------------------------------------------------------------------
# Utility estimation
# ---------------------------------------------------------------------------


def fit_utilities(blocks, widths, pmin, pmax, prices, Z,
                  first_block_offset: float = FIRST_BLOCK_OFFSET,
                  method: str = "highs") -> OpSolution:
    """Fit affine marginal utilities minimizing the total duality gap.

    ``blocks`` and ``widths`` are ``(B, T)`` arrays from
    :func:`adjust_and_split`; ``pmin``/``pmax`` are the fitted bounds.

    The LP is solved in a reduced but equivalent form: the gap ``eps_t`` and
    the lower block dual ``phi_lo`` are pure slacks of their equality rows,
    so they are eliminated and recovered from the solution afterwards.  The
    regressor term ``alpha.Z_t`` goes through one auxiliary column per hour,
    which keeps the ``B*T`` dual-feasibility rows at five nonzeros each.
    """
    X = np.asarray(blocks, float)
    E = np.asarray(widths.widths if isinstance(widths, BlockPartition) else widths, float)
    B, T = X.shape
    if E.shape != (B, T):
        raise ValueError("blocks and widths must have the same shape")
    if B < 2:
        raise ValueError("utility estimation needs at least two blocks")
    p = np.asarray(prices, float)
    pmin = np.asarray(pmin, float)
    pmax = np.asarray(pmax, float)
    Z = np.asarray(Z, float).reshape(-1, T)
    R = Z.shape[0]
    S = X.sum(axis=0)
    if np.any(pmin > pmax):
        # The dual would be unbounded; callers clamp the bounds first.
        raise InconsistentBounds("utility estimation needs pmin <= pmax in every hour")

    # Total gap = sum_t [pmax lam_hi - pmin lam_lo + sum_b E phi_hi
    #                    - sum_b x~_b mu_b - S_t w_t + p_t S_t]
    lp = LpBuilder("min")
    mu = lp.add_variables("mu_u", B, -math.inf, math.inf, cost=-X.sum(axis=1))
    alpha = lp.add_variables("alpha_u", R, -math.inf, math.inf)
    w = lp.add_variables("shift", T, -math.inf, math.inf, cost=-S)
    lam_lo = lp.add_variables("lam_lo", T, cost=-pmin)
    lam_hi = lp.add_variables("lam_hi", T, cost=pmax)
    phi_hi = lp.add_variables("phi_hi", B * T, cost=E.reshape(-1))   # index b * T + t

    t_idx = np.arange(T)
    # w_t - alpha.Z_t = 0
    lp.add_rows(np.concatenate([t_idx, np.repeat(t_idx, R)]),
                np.concatenate([w, np.tile(alpha, T)]),
                np.concatenate([np.ones(T), -Z.T.reshape(-1)]), EQ, np.zeros(T))
    # phi_hi + lam_hi - lam_lo - mu_b - w_t >= -p_t   (slack is phi_lo)
    bt = np.arange(B * T)
    t_of = np.tile(t_idx, B)
    one = np.ones(B * T)
    lp.add_rows(np.concatenate([bt] * 5),
                np.concatenate([phi_hi, lam_hi[t_of], lam_lo[t_of], np.repeat(mu, T), w[t_of]]),
                np.concatenate([one, one, -one, -one, -one]), GE, -np.tile(p, B))
    # Monotone intercepts, first block lifted by the offset.
    k = np.arange(B - 1)
    rhs = np.zeros(B - 1)
    rhs[0] = first_block_offset
    lp.add_rows(np.concatenate([k, k]), np.concatenate([mu[:-1], mu[1:]]),
                np.concatenate([np.ones(B - 1), -np.ones(B - 1)]), GE, rhs)

    sol = solve_lp(lp.build(), method)
    _require_optimal(sol, "utility estimation")
    s = sol.x
    coeffs = UtilityCoefficients(s[mu].copy(), s[alpha].copy())
    U = coeffs.evaluate(Z)
    lo, hi = s[lam_lo], s[lam_hi]
    ph = s[phi_hi].reshape(B, T)
    pl = np.maximum(ph + hi - lo - (U - p), 0.0)
    dual_obj = pmax * hi - pmin * lo + (E * ph).sum(axis=0)
    primal_obj = (X * (U - p)).sum(axis=0)
    gaps = np.maximum(dual_obj - primal_obj, 0.0)
    return OpSolution(coeffs, gaps, lo, hi, pl, ph, float(gaps.sum()))


# ---------------------------------------------------------------------------
# Full model
# ---------------------------------------------------------------------------


def fingerprint(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(np.asarray(a, dtype="<f8"))
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return "sha256:" + h.hexdigest()[:32]


@dataclass
class InverseModel:
    """Estimated bounds and utilities plus the settings that produced them."""

    bounds: BoundsCoefficients
    utilities: UtilityCoefficients
    K: float
    n_blocks: int
    first_block_offset: float = FIRST_BLOCK_OFFSET
    spec: RegressorSpec | None = None
    training_fingerprint: str = ""
    fp: FpSolution | None = field(default=None, repr=False, compare=False)
    op: OpSolution | None = field(default=None, repr=False, compare=False)

    @property
    def arity(self) -> int:
        return self.bounds.arity

    def forecast(self, Z, prices) -> forward_model.Forecast:
        return forward_model.forecast(self.bounds, self.utilities, Z, prices)

    def forecast_one_step(self, z_next, p_next: float) -> float:
        return forward_model.forecast_one_step(self.bounds, self.utilities, z_next, p_next)

    # -- serialization -----------------------------------------------------

    FORMAT = "invfor-model 1"

    def dumps(self) -> str:
        def vec(a):
            return " ".join(repr(float(v)) for v in a)

        out = io.StringIO()
        out.write(self.FORMAT + "\n")
        out.write(f"K {self.K!r}\n")
        out.write(f"blocks {self.n_blocks}\n")
        out.write(f"first_block_offset {self.first_block_offset!r}\n")
        out.write(f"arity {self.arity}\n")
        out.write(f"regressors {self.spec.to_text() if self.spec else '-'}\n")
        out.write(f"training {self.training_fingerprint or '-'}\n")
        out.write(f"bounds.mu_lo {self.bounds.mu_lo!r}\n")
        out.write(f"bounds.mu_hi {self.bounds.mu_hi!r}\n")
        out.write(f"bounds.alpha_lo {vec(self.bounds.alpha_lo)}\n".rstrip() + "\n")
        out.write(f"bounds.alpha_hi {vec(self.bounds.alpha_hi)}\n".rstrip() + "\n")
        out.write(f"utility.mu {vec(self.utilities.mu_u)}\n")
        out.write(f"utility.alpha {vec(self.utilities.alpha_u)}\n".rstrip() + "\n")
        return out.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "InverseModel":
        lines = text.splitlines()
        if not lines or lines[0].strip() != cls.FORMAT:
            raise ConfigError("not an invfor model document (bad header)")
        kv = {}
        for line in lines[1:]:
            if not line.strip():
                continue
            key, _, rest = line.partition(" ")
            kv[key] = rest.strip()
        try:
            def vec(key):
                return np.array([float(v) for v in kv[key].split()])

            arity = int(kv["arity"])
            bounds = BoundsCoefficients(float(kv["bounds.mu_lo"]), float(kv["bounds.mu_hi"]),
                                        vec("bounds.alpha_lo"), vec("bounds.alpha_hi"))
            utils = UtilityCoefficients(vec("utility.mu"), vec("utility.alpha"))
            spec = None if kv["regressors"] == "-" else RegressorSpec.from_text(kv["regressors"])
            model = cls(bounds, utils, float(kv["K"]), int(kv["blocks"]),
                        float(kv["first_block_offset"]), spec,
                        "" if kv["training"] == "-" else kv["training"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"malformed model document: {exc}") from None
        if bounds.arity != arity or utils.arity != arity or len(utils.mu_u) != model.n_blocks:
            raise ConfigError("model document dimensions are inconsistent")
        return model

    @classmethod
    def load(cls, path: str | Path) -> "InverseModel":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"no such file: {path}")
        return cls.loads(path.read_text())


def fit_inverse_model(load, Z, prices, K: float, n_blocks: int,
                      first_block_offset: float = FIRST_BLOCK_OFFSET,
                      spec: RegressorSpec | None = None,
                      method: str = "highs") -> InverseModel:
    """Run bound estimation, load adjustment and utility estimation in turn."""
    x = np.asarray(load, float)
    Z = np.asarray(Z, float).reshape(-1, len(x))
    fp = fit_bounds(x, Z, K, method)
    # Same clamp as at forecast time; it also absorbs round-off inversions
    # when K collapses the interval.
    lb = forward_model.clamp_bounds(fp.pmin, fp.pmax)
    blocks, part = adjust_and_split(x, lb.pmin, lb.pmax, n_blocks)
    op = fit_utilities(blocks, part, lb.pmin, lb.pmax, prices, Z, first_block_offset, method)
    return InverseModel(fp.coefficients, op.coefficients, K, n_blocks, first_block_offset, spec,
                        fingerprint(x, Z, prices), fp, op)


# ---------------------------------------------------------------------------
# Cross-validation of K
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CvResult:
    best_k: float
    curve: list[tuple[float, float]]

    def to_csv(self) -> str:
        lines = ["K,rmse"] + [f"{k!r},{r!r}" for k, r in self.curve]
        return "\n".join(lines) + "\n"


def _cv_point(args):
    K, x_tr, Z_tr, p_tr, Z_va, p_va, x_va, n_blocks, offset = args
    model = fit_inverse_model(x_tr, Z_tr, p_tr, K, n_blocks, offset)
    pred = model.forecast(Z_va, p_va).load
    return float(np.sqrt(np.mean((pred - x_va) ** 2)))


def cv_windows(table: TimeSeriesTable, regs: RegressorMatrix, train_len: int, val_len: int,
               start: int | None = None) -> tuple[slice, slice]:
    """Training and validation table-row slices; training starts at ``start``."""
    first = regs.start if start is None else start
    if first < regs.start:
        raise InsufficientHistory(f"training cannot start before row {regs.start}")
    stop = first + train_len + val_len
    if stop > len(table):
        raise InsufficientHistory(
            f"need {train_len}+{val_len} rows from row {first}, table has {len(table)}")
    return slice(first, first + train_len), slice(first + train_len, stop)


def cross_validate_k(table: TimeSeriesTable, spec: RegressorSpec,
                     k_grid: Sequence[float] = DEFAULT_K_GRID,
                     train_len: int = 505, val_len: int = 168, n_blocks: int = 20,
                     first_block_offset: float = FIRST_BLOCK_OFFSET,
                     start: int | None = None, n_jobs: int = 1) -> CvResult:
    """Choose ``K`` by validation RMSE of one-step forecasts.

    Each grid point fits on the training window once and forecasts every
    validation hour with its known price and regressors.  Ties go to the
    smallest ``K``.
    """
    if not k_grid:
        raise ValueError("empty K grid")
    if any(not 0.0 <= k < 1.0 for k in k_grid):
        raise ValueError("every K must lie in [0, 1)")
    if table.load is None:
        raise ConfigError("table has no load column")
    regs = build_regressors(table, spec)
    tr, va = cv_windows(table, regs, train_len, val_len, start)
    x = table.load
    jobs = [(float(K), x[tr], regs.columns(tr), table.price[tr], regs.columns(va),
             table.price[va], x[va], n_blocks, first_block_offset) for K in k_grid]
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            scores = list(pool.map(_cv_point, jobs))
    else:
        scores = [_cv_point(j) for j in jobs]
    curve = sorted(zip((float(k) for k in k_grid), scores))
    # Scores equal up to LP round-off count as ties.
    low = min(r for _, r in curve)
    best = next(k for k, r in curve if r <= low + CV_TIE_RTOL * (1.0 + low))
    return CvResult(best, curve)
