"""Fleet of heat-pump buildings under economic MPC.

Each building is a three-state linear model (room air, floor, water tank)
driven by heat-pump consumption and by ambient temperature and solar
irradiance.  Every hour the controller solves an LP that minimizes energy
cost plus a comfort-violation penalty over a receding horizon and applies the
first action.  Summing the fleet's consumption gives the aggregate load
series used to train and test the forecasters.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from .data import TimeSeriesTable, hourly_index
from .errors import ConfigError, SolverFailure, UnstableBase
from .lp_core import GE, LE, LpBuilder, Status, solve_lp

FLEX, NO_FLEX = "flex", "no_flex"


@dataclass(frozen=True)
class BuildingParams:
    """State-space model and EMPC settings of one building.

    ``y_min``/``y_max`` are the room comfort band in degC, either scalars or
    per-hour arrays aligned with the simulated span.
    """

    A: np.ndarray
    Bm: np.ndarray
    Em: np.ndarray
    x_max: float = 5.0
    rho: float = 100.0
    y_min: float | np.ndarray = 21.0
    y_max: float | np.ndarray = 21.0

    def __post_init__(self):
        A = np.asarray(self.A, float).reshape(3, 3)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Bm", np.asarray(self.Bm, float).reshape(3))
        object.__setattr__(self, "Em", np.asarray(self.Em, float).reshape(3, 2))
        if not self.x_max > 0:
            raise ConfigError("x_max must be positive")
        if self.rho < 0:
            raise ConfigError("rho must be nonnegative")
        if np.any(np.asarray(self.y_min) > np.asarray(self.y_max)):
            raise ConfigError("comfort band has y_min > y_max")

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    def steady_state(self, x: float, z) -> np.ndarray:
        """Fixed point of the dynamics under constant input and disturbance."""
        rhs = self.Bm * x + self.Em @ np.asarray(z, float)
        return np.linalg.solve(np.eye(3) - self.A, rhs)


@dataclass(frozen=True)
class BuildingState:
    y_room: float
    y_floor: float
    y_water: float

    def as_array(self) -> np.ndarray:
        return np.array([self.y_room, self.y_floor, self.y_water])

    @classmethod
    def from_array(cls, y) -> "BuildingState":
        y = np.asarray(y, float)
        return cls(float(y[0]), float(y[1]), float(y[2]))


def state_step(y, x: float, z, params: BuildingParams):
    """One hour of dynamics: ``A y + B x + E z``.

    Accepts a :class:`BuildingState` or a length-3 array and returns the same
    kind.
    """
    arr = y.as_array() if isinstance(y, BuildingState) else np.asarray(y, float)
    nxt = params.A @ arr + params.Bm * x + params.Em @ np.asarray(z, float)
    return BuildingState.from_array(nxt) if isinstance(y, BuildingState) else nxt


# ---------------------------------------------------------------------------
# Parameter file
# ---------------------------------------------------------------------------


def _parse_matrix(text: str) -> np.ndarray:
    return np.array([[float(v) for v in row.split()] for row in text.split(";")])


def read_parameter_file(path: str | Path | None = None) -> dict:
    """Read a ``key = value`` building parameter document.

    Matrices are written row by row with ``;`` between rows.  ``path=None``
    reads the packaged default.
    """
    if path is None:
        text = resources.files("invfor").joinpath("resources/building_default.txt").read_text()
    else:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"no such file: {path}")
        text = path.read_text()
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"parameter file line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            out[key] = _parse_matrix(value) if key in ("A", "B", "E") else float(value)
        except ValueError:
            raise ConfigError(f"parameter file line {lineno}: bad value for {key}") from None
    for key in ("A", "B", "E"):
        if key not in out:
            raise ConfigError(f"parameter file lacks {key}")
    return out


def building_from_file(path: str | Path | None = None) -> BuildingParams:
    p = read_parameter_file(path)
    return BuildingParams(p["A"], p["B"], p["E"], p.get("x_max", 5.0), p.get("rho", 100.0),
                          p.get("setpoint", 21.0), p.get("setpoint", 21.0))


# ---------------------------------------------------------------------------
# EMPC
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpcPlan:
    """Optimal open-loop plan.  ``states[k]`` is the state after ``k`` steps."""

    x: np.ndarray
    states: np.ndarray
    violations: np.ndarray
    objective: float


def _response(params: BuildingParams, y0, z, H):
    """Free room response and input-to-room matrix over ``H`` steps."""
    A, B, E = params.A, params.Bm, params.Em
    free = np.empty(H)
    y = np.asarray(y0, float)
    for k in range(H):
        y = A @ y + E @ z[k]
        free[k] = y[0]
    # Room temperature k+1 steps ahead per unit input: e1' A^k B.
    markov = np.empty(H)
    v = B.copy()
    for k in range(H):
        markov[k] = v[0]
        v = A @ v
    G = np.zeros((H, H))
    for k in range(H):
        G[k, : k + 1] = markov[k::-1]
    return free, G


def empc_schedule(params: BuildingParams, prices, weather, y0, horizon: int | None = None,
                  y_min=None, y_max=None, method: str = "highs") -> EmpcPlan:
    """Solve the EMPC LP over ``horizon`` hours.

    ``weather`` is an ``(H, 2)`` array of (ambient temperature, solar).
    Comfort bounds default to the params' band and apply to the room
    temperature after each step.  The state trajectory is produced by
    forward-simulating the optimal inputs.
    """
    prices = np.asarray(prices, float)
    H = len(prices) if horizon is None else int(horizon)
    if H < 1:
        raise ValueError("horizon must be at least 1")
    prices = prices[:H]
    z = np.asarray(weather, float).reshape(-1, 2)[:H]
    if len(prices) < H or len(z) < H:
        raise ValueError("price and weather series shorter than the horizon")
    y0 = y0.as_array() if isinstance(y0, BuildingState) else np.asarray(y0, float)
    lo = np.broadcast_to(np.asarray(params.y_min if y_min is None else y_min, float), (H,))
    hi = np.broadcast_to(np.asarray(params.y_max if y_max is None else y_max, float), (H,))
    if not (np.isfinite(prices).all() and np.isfinite(z).all() and np.isfinite(y0).all()):
        raise ValueError("EMPC inputs must be finite")

    free, G = _response(params, y0, z, H)
    lp = LpBuilder("min")
    xs = lp.add_variables("x", H, 0.0, params.x_max, cost=prices)
    vs = lp.add_variables("v", H, cost=params.rho)
    rows, cols = np.nonzero(G)
    k = np.arange(H)
    # room + v >= y_min  and  room - v <= y_max
    lp.add_rows(np.concatenate([rows, k]), np.concatenate([xs[cols], vs]),
                np.concatenate([G[rows, cols], np.ones(H)]), GE, lo - free)
    lp.add_rows(np.concatenate([rows, k]), np.concatenate([xs[cols], vs]),
                np.concatenate([G[rows, cols], -np.ones(H)]), LE, hi - free)
    sol = solve_lp(lp.build(), method)
    if sol.status is not Status.OPTIMAL:
        raise SolverFailure(f"EMPC LP ended {sol.status.value}")
    x = np.clip(sol.x[xs], 0.0, params.x_max)
    states = np.empty((H + 1, 3))
    states[0] = y0
    for t in range(H):
        states[t + 1] = state_step(states[t], x[t], z[t], params)
    room = states[1:, 0]
    v = np.maximum(0.0, np.maximum(lo - room, room - hi))
    objective = float(prices @ x + params.rho * v.sum())
    return EmpcPlan(x, states, v, objective)


# ---------------------------------------------------------------------------
# Fleet
# ---------------------------------------------------------------------------


def generate_population(base: BuildingParams, n: int, perturbation: float = 1 / 50,
                        seed: int = 0, max_tries: int = 1000) -> list[BuildingParams]:
    """Perturb the heat-transfer couplings of ``base.A`` for ``n`` buildings.

    Each off-diagonal nonzero ``a`` of ``A`` gets an independent uniform draw
    with variance ``perturbation * |a|`` (half-width ``sqrt(3 * perturbation * |a|)``).
    A coupling also enters the diagonal with the opposite sign, so the
    diagonal absorbs the row's total change and row sums (the heat balance)
    are preserved.  Draws that flip the sign of an entry or make ``A``
    unstable are redrawn.
    """
    if n < 0:
        raise ValueError("fleet size must be nonnegative")
    if perturbation < 0:
        raise ValueError("perturbation scale must be nonnegative")
    if base.spectral_radius >= 1:
        raise UnstableBase(f"base building has spectral radius {base.spectral_radius:.4f}")
    rng = np.random.default_rng(seed)
    mask = (~np.eye(3, dtype=bool)) & (base.A != 0)
    half = np.sqrt(3.0 * perturbation * np.abs(base.A))
    fleet = []
    for _ in range(n):
        for _ in range(max_tries):
            delta = np.where(mask, rng.uniform(-1.0, 1.0, (3, 3)) * half, 0.0)
            A = base.A + delta - np.diag(delta.sum(axis=1))
            if np.all(np.sign(A[base.A != 0]) == np.sign(base.A[base.A != 0])) and \
                    np.max(np.abs(np.linalg.eigvals(A))) < 1:
                break
        else:
            raise UnstableBase("could not draw a stable perturbation")
        fleet.append(replace(base, A=A))
    return fleet


def comfort_band(mode: str, hours, setpoint: float = 21.0, band: float = 2.0,
                 night_setback: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Room comfort band per hour for a dataset mode.

    ``no_flex`` pins the band to the setpoint; ``flex`` opens it to
    ``setpoint +- band/2``.  A nonzero ``night_setback`` lowers the setpoint
    between 23:00 and 06:00.
    """
    hours = np.asarray(hours)
    sp = np.where((hours >= 23) | (hours < 6), setpoint - night_setback, setpoint)
    if mode == NO_FLEX:
        return sp.astype(float), sp.astype(float)
    if mode == FLEX:
        return sp - band / 2.0, sp + band / 2.0
    raise ValueError(f"unknown dataset mode {mode!r}")


def simulate_building(params: BuildingParams, prices, weather, y_min, y_max, horizon: int = 24,
                      y0=None, n_hours: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Receding-horizon EMPC run; returns hourly consumption and room temperature.

    ``weather`` is ``(N, 2)``.  The horizon shrinks near the end of the input
    span.
    """
    prices = np.asarray(prices, float)
    z = np.asarray(weather, float).reshape(-1, 2)
    N = len(prices) if n_hours is None else n_hours
    lo = np.broadcast_to(np.asarray(y_min, float), (len(prices),))
    hi = np.broadcast_to(np.asarray(y_max, float), (len(prices),))
    if y0 is None:
        y0 = params.steady_state(0.0, z[0])
        y0 = y0 + (0.5 * (lo[0] + hi[0]) - y0[0])
    y = np.asarray(y0, float)
    load = np.empty(N)
    room = np.empty(N)
    for t in range(N):
        H = min(horizon, len(prices) - t)
        # Comfort applies to states after each action, i.e. hours t+1..t+H.
        idx = np.minimum(np.arange(t + 1, t + H + 1), len(prices) - 1)
        plan = empc_schedule(params, prices[t:t + H], z[t:t + H], y, H, lo[idx], hi[idx])
        load[t] = plan.x[0]
        y = state_step(y, plan.x[0], z[t], params)
        room[t] = y[0]
    return load, room


def _simulate_job(args):
    params, prices, z, lo, hi, horizon, n_hours = args
    return simulate_building(params, prices, z, lo, hi, horizon, n_hours=n_hours)[0]


def build_dataset(fleet, inputs: TimeSeriesTable, mode: str, horizon: int = 24,
                  burn_in: int = 0, setpoint: float = 21.0, band: float = 2.0,
                  night_setback: float = 0.0, per_building: bool = False,
                  n_hours: int | None = None, n_jobs: int = 1) -> TimeSeriesTable:
    """Aggregate fleet load for ``mode`` over the input span.

    Only the first ``n_hours`` input rows are simulated (default: all); later
    rows serve as controller look-ahead.  The first ``burn_in`` hours are
    simulated but dropped from the output.  Buildings are summed in fleet
    order so the aggregate is deterministic.
    """
    if mode not in (FLEX, NO_FLEX):
        raise ValueError(f"unknown dataset mode {mode!r}")
    n = len(inputs) if n_hours is None else n_hours
    if n > len(inputs):
        raise ConfigError(f"cannot simulate {n} hours from {len(inputs)} input rows")
    if burn_in >= n:
        raise ConfigError(f"burn-in of {burn_in} h leaves no data from {n} input rows")
    z = np.column_stack([inputs.temp_ambient, inputs.solar])
    lo, hi = comfort_band(mode, inputs.hours, setpoint, band, night_setback)
    jobs = [(b, inputs.price, z, lo, hi, horizon, n) for b in fleet]
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            loads = list(pool.map(_simulate_job, jobs))
    else:
        loads = [_simulate_job(j) for j in jobs]
    total = np.zeros(n)
    for col in loads:
        total = total + col
    out = inputs.slice(burn_in, n)
    out.load = total[burn_in:]
    out.extra = {}
    if per_building:
        out.extra = {f"load_b{i:03d}": col[burn_in:] for i, col in enumerate(loads)}
    return out


# ---------------------------------------------------------------------------
# Synthetic inputs
# ---------------------------------------------------------------------------


def _ar1(rng, n, phi, sigma):
    e = rng.normal(0.0, sigma, n)
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = phi * acc + e[i]
        out[i] = acc
    return out


def synthetic_inputs(n_hours: int, seed: int = 0,
                     start: datetime = datetime(2024, 1, 1, tzinfo=timezone.utc),
                     price_noise: float = 0.06, price_ar: float = 0.5) -> TimeSeriesTable:
    """Winter price and weather series: diurnal shapes plus seeded AR(1) noise.

    Prices are in currency/kWh, ambient temperature in degC and solar
    irradiance in W/m2.  ``price_noise`` and ``price_ar`` are the innovation
    standard deviation and persistence of the price noise.
    """
    rng = np.random.default_rng(seed)
    ts = hourly_index(start, n_hours)
    h = np.array([t.hour for t in ts], dtype=float)
    day = np.arange(n_hours) // 24
    # Two daily price peaks (morning, early evening) over a base level.
    shape = 0.6 * np.exp(-0.5 * ((h - 8) / 2.0) ** 2) + np.exp(-0.5 * ((h - 18) / 2.5) ** 2)
    price = 0.22 + 0.18 * shape + _ar1(rng, n_hours, price_ar, price_noise)
    price = np.maximum(price, 0.01)
    daily = rng.normal(0.0, 3.0, day.max() + 1)
    temp = (-1.0 + np.repeat(daily, 24)[:n_hours] - 3.0 * np.cos(2 * math.pi * (h - 3) / 24)
            + _ar1(rng, n_hours, 0.9, 0.4))
    cloud = rng.uniform(0.3, 1.0, day.max() + 1)
    sun = np.clip(np.sin(math.pi * (h - 8) / 8), 0.0, None) * ((h >= 8) & (h <= 16))
    solar = 70.0 * sun * np.repeat(cloud, 24)[:n_hours]
    return TimeSeriesTable(ts, price, temp, solar)
