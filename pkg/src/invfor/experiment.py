"""Experiment configuration and the batch pipelines behind the CLI."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import benchmarks, simulator
from .data import TimeSeriesTable, format_timestamp
from .errors import ConfigError, InvforError
from .estimation import (DEFAULT_K_GRID, InverseModel, RegressorSpec, build_regressors,
                         cross_validate_k, fit_inverse_model)

ENV_PREFIX = "INVFOR_"


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", ";").split(";") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", ";").split(";") if v.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class ExperimentConfig:
    """Every tunable of an experiment; see ``README.md`` for the file format."""

    # paths
    inputs: str = ""             # price/weather CSV; empty -> synthetic inputs
    params_file: str = ""        # building parameter file; empty -> packaged default
    out: str = "out"
    # simulation
    seed: int = 0
    n_buildings: int = 100
    perturbation: float = 1 / 50
    horizon: int = 24
    burn_in: int = 48
    rho: float = 100.0
    x_max: float = 5.0
    setpoint: float = 21.0
    band: float = 2.0
    night_setback: float = 0.0
    per_building: bool = False
    price_noise: float = 0.06    # synthetic price innovations
    price_ar: float = 0.5
    # estimation
    blocks: int = 20
    first_block_offset: float = 200.0
    k_grid: tuple[float, ...] = DEFAULT_K_GRID
    k: float | None = None
    train_len: int = 505
    val_len: int = 168
    backtest_len: int = 120
    hour_indicators: bool = True
    temperature: bool = True
    solar: bool = True
    load_lags: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    price_lags: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    # benchmarks
    p_max: int = 4
    q_max: int = 2
    n_jobs: int = 1

    def __post_init__(self):
        for name in ("train_len", "val_len", "backtest_len", "blocks", "horizon"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.blocks < 2:
            raise ConfigError("blocks must be at least 2")
        if self.n_buildings < 0 or self.burn_in < 0:
            raise ConfigError("n_buildings and burn_in must be nonnegative")
        if self.k is not None and not 0 <= self.k < 1:
            raise ConfigError("k must lie in [0, 1)")
        if not self.k_grid or any(not 0 <= k < 1 for k in self.k_grid):
            raise ConfigError("k_grid values must lie in [0, 1)")

    @property
    def spec(self) -> RegressorSpec:
        return RegressorSpec(self.hour_indicators, self.temperature, self.solar,
                             self.load_lags, self.price_lags)

    @property
    def dataset_hours(self) -> int:
        """Rows needed after burn-in: lag history, CV windows and the backtest."""
        return self.spec.max_lag + self.train_len + self.val_len + self.backtest_len

    # -- parsing -----------------------------------------------------------

    @classmethod
    def _convert(cls, key: str, value: str):
        f = {f.name: f for f in fields(cls)}.get(key)
        if f is None:
            raise ConfigError(f"unknown config key {key!r}")
        default = getattr(cls, key, None) if key != "k" else None
        try:
            if key == "k":
                return None if value.strip() in ("", "cv", "none") else float(value)
            if key == "k_grid":
                return _floats(value)
            if key in ("load_lags", "price_lags"):
                return _ints(value)
            if isinstance(default, bool):
                return _bool(value)
            if isinstance(default, int):
                return int(value)
            if isinstance(default, float):
                return float(value)
            return value.strip()
        except ValueError as exc:
            raise ConfigError(f"config key {key}: {exc}") from None

    @classmethod
    def from_mapping(cls, items: dict[str, str], base: "ExperimentConfig | None" = None):
        values = {k: cls._convert(k, v) for k, v in items.items()}
        return replace(base, **values) if base is not None else cls(**values)

    @classmethod
    def load(cls, path: str | Path | None = None, env: dict | None = None,
             overrides: dict | None = None) -> "ExperimentConfig":
        """Defaults, then the config file, then ``INVFOR_*`` variables, then ``overrides``."""
        items: dict[str, str] = {}
        if path:
            path = Path(path)
            if not path.exists():
                raise ConfigError(f"no such file: {path}")
            for lineno, line in enumerate(path.read_text().splitlines(), 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, value = (s.strip() for s in line.split("=", 1))
                items[key] = value
        env = os.environ if env is None else env
        for key, value in env.items():
            if key.startswith(ENV_PREFIX):
                items[key[len(ENV_PREFIX):].lower()] = value
        cfg = cls.from_mapping(items)
        if overrides:
            cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
        return cfg

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ";".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif v is None:
                v = "cv"
            elif isinstance(v, bool):
                v = int(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def simulate_datasets(cfg: ExperimentConfig) -> dict[str, TimeSeriesTable]:
    """Flex and no-flex datasets of ``cfg.dataset_hours`` rows each."""
    n_sim = cfg.burn_in + cfg.dataset_hours
    if cfg.inputs:
        inputs = TimeSeriesTable.from_csv(cfg.inputs)
        if len(inputs) < n_sim:
            raise ConfigError(f"{cfg.inputs}: {len(inputs)} rows, experiment needs {n_sim}")
    else:
        inputs = simulator.synthetic_inputs(n_sim + cfg.horizon, seed=cfg.seed,
                                            price_noise=cfg.price_noise, price_ar=cfg.price_ar)
    base = simulator.building_from_file(cfg.params_file or None)
    base = replace(base, x_max=cfg.x_max, rho=cfg.rho)
    fleet = simulator.generate_population(base, cfg.n_buildings, cfg.perturbation, cfg.seed)
    out = {}
    for mode in (simulator.FLEX, simulator.NO_FLEX):
        out[mode] = simulator.build_dataset(
            fleet, inputs, mode, cfg.horizon, cfg.burn_in, cfg.setpoint, cfg.band,
            cfg.night_setback, cfg.per_building, n_hours=n_sim, n_jobs=cfg.n_jobs)
    return out


# ---------------------------------------------------------------------------
# cv / estimate / forecast
# ---------------------------------------------------------------------------


def run_cv(cfg: ExperimentConfig, table: TimeSeriesTable, k_grid: Sequence[float] | None = None):
    return cross_validate_k(table, cfg.spec, k_grid or cfg.k_grid, cfg.train_len, cfg.val_len,
                            cfg.blocks, cfg.first_block_offset, n_jobs=cfg.n_jobs)


def estimate(cfg: ExperimentConfig, table: TimeSeriesTable, K: float,
             end: int | None = None) -> InverseModel:
    """Fit on the ``train_len`` rows that end just before row ``end`` (default: table end)."""
    if table.load is None:
        raise ConfigError("dataset has no load column")
    regs = build_regressors(table, cfg.spec)
    end = len(table) if end is None else end
    start = end - cfg.train_len
    if start < regs.start:
        raise ConfigError(f"need {cfg.train_len} training rows after {regs.start} lag rows, "
                          f"dataset has {len(table)}")
    rows = slice(start, end)
    return fit_inverse_model(table.load[rows], regs.columns(rows), table.price[rows], K,
                             cfg.blocks, cfg.first_block_offset, cfg.spec)


def forecast_row(model: InverseModel, table: TimeSeriesTable, row: int):
    """Forecast ``table`` row ``row`` from the rows before it plus its own price."""
    spec = model.spec or RegressorSpec()
    regs = build_regressors(_mask_load_from(table, row), spec)
    return model.forecast(regs.columns(np.array([row])), table.price[row:row + 1])


def _mask_load_from(table: TimeSeriesTable, row: int) -> TimeSeriesTable:
    # Loads at or after the forecast hour are unknown; NaN makes any leak loud.
    t = table.slice(0, row + 1)
    if t.load is None:
        t.load = np.full(len(t), np.nan)
    else:
        t.load = t.load.copy()
        t.load[row:] = np.nan
    return t


# ---------------------------------------------------------------------------
# backtest
# ---------------------------------------------------------------------------


def armax_exog(table: TimeSeriesTable, spec: RegressorSpec):
    """ARMAX inputs: the inverse model's regressors minus load lags (the AR part
    covers them) and minus one hour indicator (the intercept covers it), plus
    the price of the hour being explained."""
    regs = build_regressors(table, spec)
    keep = [i for i, n in enumerate(regs.names)
            if not n.startswith("load_lag") and n != "hour_00"]
    values = np.vstack([regs.values[keep], table.price[regs.start:][None, :]])
    return values, regs.start


@dataclass
class BacktestRecord:
    timestamp: str
    actual: float
    invfor: float
    armax: float
    persistence: float
    pmin: float
    pmax: float
    armax_order: tuple[int, int]
    utilities: np.ndarray = field(repr=False)


@dataclass
class BacktestReport:
    dataset: str
    K: float
    records: list[BacktestRecord]

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def metrics(self) -> dict[str, benchmarks.MetricsReport]:
        actual = self.series("actual")
        return {m: benchmarks.metrics(self.series(m), actual)
                for m in ("persistence", "armax", "invfor")}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        B = len(self.records[0].utilities) if self.records else 0
        w.writerow(["timestamp", "dataset", "K", "actual", "invfor", "armax", "persistence",
                    "pmin", "pmax", "armax_p", "armax_q", *[f"u{b + 1:02d}" for b in range(B)]])
        for r in self.records:
            w.writerow([r.timestamp, self.dataset, repr(self.K), repr(r.actual), repr(r.invfor),
                        repr(r.armax), repr(r.persistence), repr(r.pmin), repr(r.pmax),
                        r.armax_order[0], r.armax_order[1], *(repr(float(u)) for u in r.utilities)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path: str | Path) -> "BacktestReport":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"no such file: {path}")
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ConfigError(f"{path}: empty backtest report")
        try:
            ucols = sorted(k for k in rows[0] if k.startswith("u") and k[1:].isdigit())
            recs = [BacktestRecord(r["timestamp"], float(r["actual"]), float(r["invfor"]),
                                   float(r["armax"]), float(r["persistence"]), float(r["pmin"]),
                                   float(r["pmax"]), (int(r["armax_p"]), int(r["armax_q"])),
                                   np.array([float(r[c]) for c in ucols]))
                    for r in rows]
            return cls(rows[0]["dataset"], float(rows[0]["K"]), recs)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{path}: malformed backtest report ({exc})") from None


def backtest_rows(cfg: ExperimentConfig, table: TimeSeriesTable) -> range:
    """The final ``backtest_len`` rows of the dataset."""
    first = len(table) - cfg.backtest_len
    need = cfg.spec.max_lag + cfg.train_len
    if first < need:
        raise ConfigError(f"dataset has {len(table)} rows; backtest needs at least "
                          f"{need + cfg.backtest_len}")
    return range(first, len(table))


def run_backtest(cfg: ExperimentConfig, table: TimeSeriesTable, K: float,
                 dataset: str = "dataset", rows: Sequence[int] | None = None) -> BacktestReport:
    """Rolling one-step forecasts, refitting every model on a sliding window.

    At hour ``t`` all models see loads and prices strictly before ``t``, the
    regressors of hour ``t`` and the price at ``t``.
    """
    if table.load is None:
        raise ConfigError("dataset has no load column")
    rows = backtest_rows(cfg, table) if rows is None else rows
    spec = cfg.spec
    W = cfg.train_len
    records = []
    for t in rows:
        view = _mask_load_from(table, t)
        stamp = format_timestamp(table.timestamps[t])
        try:
            regs = build_regressors(view, spec)
            win = slice(t - W, t)
            model = fit_inverse_model(view.load[win], regs.columns(win), view.price[win], K,
                                      cfg.blocks, cfg.first_block_offset, spec)
            fc = model.forecast(regs.columns(np.array([t])), view.price[t:t + 1])

            ex, ex_start = armax_exog(view, spec)
            x_win = view.load[win]
            ex_win = ex[:, t - W - ex_start:t - ex_start]
            order = benchmarks.select_order_aicc(x_win, ex_win, cfg.p_max, cfg.q_max)
            fit = benchmarks.fit_armax(x_win, ex_win, *order)
            armax = fit.forecast_next(x_win, ex[:, t - ex_start])
        except InvforError as exc:
            raise type(exc)(f"backtest hour {stamp}: {exc}") from exc
        records.append(BacktestRecord(
            stamp, float(table.load[t]), float(fc.load[0]), float(armax),
            float(view.load[t - 1]), float(fc.pmin[0]), float(fc.pmax[0]), order,
            fc.utilities[:, 0].copy()))
    return BacktestReport(dataset, K, records)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def summary_csv(reports: Sequence[BacktestReport]) -> str:
    """One row per (model, dataset) with NRMSE and SMAPE."""
    if not reports:
        raise ConfigError("report needs at least one backtest")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "dataset", "nrmse", "smape"])
    for rep in reports:
        for model, m in rep.metrics().items():
            w.writerow([model, rep.dataset, repr(m.nrmse), repr(m.smape)])
    return buf.getvalue()
