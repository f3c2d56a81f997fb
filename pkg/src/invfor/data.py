"""Hourly time-series tables and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .errors import ConfigError

HOUR = timedelta(hours=1)


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def hourly_index(start: datetime, n: int) -> list[datetime]:
    return [start + i * HOUR for i in range(n)]


def check_hourly(timestamps) -> None:
    """Raise :class:`ConfigError` on any gap or non-hourly step."""
    for a, b in zip(timestamps, timestamps[1:]):
        if b - a != HOUR:
            raise ConfigError(f"timestamps not hourly: {format_timestamp(a)} -> {format_timestamp(b)}")


def _num(v: float) -> str:
    return repr(float(v))


@dataclass
class TimeSeriesTable:
    """Aligned hourly records.

    ``load`` may be absent (``None``) for input weather/price files.  Extra
    columns (e.g. per-building loads) go in ``extra`` and are written after
    the standard ones.
    """

    timestamps: list[datetime]
    price: np.ndarray
    temp_ambient: np.ndarray
    solar: np.ndarray
    load: np.ndarray | None = None
    extra: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.timestamps)
        self.price = np.asarray(self.price, float)
        self.temp_ambient = np.asarray(self.temp_ambient, float)
        self.solar = np.asarray(self.solar, float)
        if self.load is not None:
            self.load = np.asarray(self.load, float)
        for name, col in self.columns().items():
            if len(col) != n:
                raise ConfigError(f"column {name!r} has {len(col)} rows, expected {n}")
        check_hourly(self.timestamps)

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def hours(self) -> np.ndarray:
        return np.array([ts.hour for ts in self.timestamps], dtype=int)

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"price": self.price}
        if self.load is not None:
            cols["load"] = self.load
        cols["temp_ambient"] = self.temp_ambient
        cols["solar"] = self.solar
        cols.update(self.extra)
        return cols

    def slice(self, start: int, stop: int) -> "TimeSeriesTable":
        return TimeSeriesTable(
            self.timestamps[start:stop], self.price[start:stop], self.temp_ambient[start:stop],
            self.solar[start:stop], None if self.load is None else self.load[start:stop],
            {k: v[start:stop] for k, v in self.extra.items()},
        )

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = self.columns()
        writer.writerow(["timestamp", *cols])
        for i, ts in enumerate(self.timestamps):
            writer.writerow([format_timestamp(ts), *(_num(c[i]) for c in cols.values())])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path: str | Path) -> "TimeSeriesTable":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"no such file: {path}")
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise ConfigError(f"empty CSV: {path}") from None
            rows = [r for r in reader if r]
        required = ("timestamp", "price", "temp_ambient", "solar")
        missing = [c for c in required if c not in header]
        if missing:
            raise ConfigError(f"{path}: missing column(s) {', '.join(missing)}")
        idx = {h: i for i, h in enumerate(header)}
        try:
            ts = [parse_timestamp(r[idx["timestamp"]]) for r in rows]
            data = {h: np.array([float(r[i]) for r in rows]) for h, i in idx.items()
                    if h != "timestamp"}
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        extra = {h: v for h, v in data.items() if h not in ("price", "load", "temp_ambient", "solar")}
        return cls(ts, data["price"], data["temp_ambient"], data["solar"], data.get("load"), extra)
