"""Price, funding and exogenous time series: types, CSV ingestion, alignment.

All timestamps are integer seconds since the Unix epoch, UTC. Series are
immutable numpy-backed dataclasses; arrays are marked read-only on
construction.
"""

from __future__ import annotations

import calendar
import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

HOUR = 3600
MINUTE = 60
EIGHT_HOURS = 8 * HOUR
DAY = 24 * HOUR
YEAR_SECONDS = 365 * DAY
HOURS_PER_YEAR = 8760
PERIODS_PER_YEAR = 1095  # 8-hour funding periods in a 365-day year

PRICE_HEADER = ("timestamp", "futures_price", "spot_price")
FUNDING_HEADER = ("timestamp", "funding_rate")
EXOGENOUS_HEADER = ("timestamp", "value")


class DataError(ValueError):
    """Raised for malformed or inconsistent input data.

    ``line`` is the 1-based line number in the source file when known.
    """

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        prefix = ""
        if path is not None:
            prefix += f"{path}: "
        if line is not None:
            prefix += f"line {line}: "
        super().__init__(prefix + message)


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def parse_timestamp(text: str) -> int:
    """Parse ISO-8601 UTC (``2020-01-31T00:00:00Z``) or integer epoch seconds."""
    s = text.strip()
    if not s:
        raise ValueError("empty timestamp")
    if s.lstrip("-").isdigit():
        return int(s)
    iso = s[:-1] + "+00:00" if s.endswith("Z") else s
    dt = datetime.fromisoformat(iso)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    if dt.utcoffset() != timezone.utc.utcoffset(None):
        raise ValueError(f"timestamp not in UTC: {text!r}")
    seconds = dt.timestamp()
    if seconds != int(seconds):
        raise ValueError(f"sub-second timestamp: {text!r}")
    return int(seconds)


def add_months(ts: int, months: int) -> int:
    """Shift an epoch timestamp by whole calendar months, clamping the day."""
    dt = datetime.fromtimestamp(int(ts), tz=timezone.utc)
    k = dt.year * 12 + dt.month - 1 + months
    year, month = divmod(k, 12)
    month += 1
    day = min(dt.day, calendar.monthrange(year, month)[1])
    return int(dt.replace(year=year, month=month, day=day).timestamp())


def month_key(ts: int) -> tuple[int, int]:
    dt = datetime.fromtimestamp(int(ts), tz=timezone.utc)
    return dt.year, dt.month


def year_of(ts) -> np.ndarray:
    """Calendar year (UTC) of each epoch timestamp."""
    return np.asarray(ts, dtype="datetime64[s]").astype("datetime64[Y]").astype(np.int64) + 1970


def format_timestamp(ts: int) -> str:
    return datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_float(text: str, what: str) -> float:
    s = text.strip()
    if "," in s or "_" in s:
        raise ValueError(f"{what}: thousands separators not allowed: {text!r}")
    return float(s)


def _check_increasing(ts: np.ndarray, what: str) -> None:
    if ts.size > 1:
        d = np.diff(ts)
        if np.any(d == 0):
            i = int(np.flatnonzero(d == 0)[0]) + 1
            raise DataError(f"{what}: duplicate timestamp {format_timestamp(ts[i])}")
        if np.any(d < 0):
            i = int(np.flatnonzero(d < 0)[0]) + 1
            raise DataError(f"{what}: timestamps not increasing at {format_timestamp(ts[i])}")


@dataclass(frozen=True)
class MarketSeries:
    """Futures and spot prices for one asset at a fixed cadence.

    Gaps (spacing larger than ``cadence``) are kept as-is; ``gap_count``
    reports how many.
    """

    asset_id: str
    cadence: int
    timestamps: np.ndarray
    futures: np.ndarray
    spot: np.ndarray
    gap_count: int = field(init=False)

    def __post_init__(self):
        ts = _frozen(self.timestamps, np.int64)
        fut = _frozen(self.futures, np.float64)
        spot = _frozen(self.spot, np.float64)
        if self.cadence <= 0:
            raise DataError(f"{self.asset_id}: cadence must be positive")
        if not (ts.shape == fut.shape == spot.shape) or ts.ndim != 1:
            raise DataError(f"{self.asset_id}: column lengths differ")
        for name, arr in (("futures_price", fut), ("spot_price", spot)):
            bad = ~np.isfinite(arr) | (arr <= 0)
            if np.any(bad):
                i = int(np.flatnonzero(bad)[0])
                raise DataError(f"{self.asset_id}: {name} must be positive and finite (observation {i})")
        _check_increasing(ts, self.asset_id)
        if np.any(ts % self.cadence):
            i = int(np.flatnonzero(ts % self.cadence)[0])
            raise DataError(
                f"{self.asset_id}: timestamp {format_timestamp(ts[i])} not aligned to cadence {self.cadence}s"
            )
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "futures", fut)
        object.__setattr__(self, "spot", spot)
        gaps = int(np.count_nonzero(np.diff(ts) > self.cadence)) if ts.size > 1 else 0
        object.__setattr__(self, "gap_count", gaps)

    def __len__(self) -> int:
        return int(self.timestamps.size)

    @property
    def has_gaps(self) -> bool:
        return self.gap_count > 0

    @property
    def rho(self) -> np.ndarray:
        """Annualized futures-spot deviation at every observation."""
        return deviation(self.futures, self.spot)

    def segment(self, start: int, stop: int) -> "MarketSeries":
        """Observations ``start..stop-1`` (python slice semantics)."""
        sl = slice(start, stop)
        return MarketSeries(self.asset_id, self.cadence, self.timestamps[sl], self.futures[sl], self.spot[sl])

    def between(self, t0: int, t1: int) -> "MarketSeries":
        """Observations with ``t0 <= timestamp < t1``."""
        i0, i1 = np.searchsorted(self.timestamps, [t0, t1], side="left")
        return self.segment(int(i0), int(i1))


@dataclass(frozen=True)
class FundingSchedule:
    """Realized funding rates, one per 8-hour event at 00:00/08:00/16:00 UTC."""

    asset_id: str
    timestamps: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        ts = _frozen(self.timestamps, np.int64)
        rates = _frozen(self.rates, np.float64)
        if ts.shape != rates.shape or ts.ndim != 1:
            raise DataError(f"{self.asset_id}: funding column lengths differ")
        if not np.all(np.isfinite(rates)):
            raise DataError(f"{self.asset_id}: non-finite funding rate")
        _check_increasing(ts, f"{self.asset_id} funding")
        off = ts % EIGHT_HOURS
        if np.any(off):
            i = int(np.flatnonzero(off)[0])
            raise DataError(
                f"{self.asset_id}: funding event {format_timestamp(ts[i])} not at 00:00, 08:00 or 16:00 UTC"
            )
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "rates", rates)

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def rate_at(self, t: int) -> float:
        i = int(np.searchsorted(self.timestamps, t))
        if i >= self.timestamps.size or self.timestamps[i] != t:
            raise KeyError(f"no funding event at {format_timestamp(t)}")
        return float(self.rates[i])

    def between(self, t0: int, t1: int) -> "FundingSchedule":
        """Events with ``t0 <= timestamp < t1``."""
        i0, i1 = np.searchsorted(self.timestamps, [t0, t1], side="left")
        return FundingSchedule(self.asset_id, self.timestamps[i0:i1], self.rates[i0:i1])


@dataclass(frozen=True)
class ExogenousSeries:
    """A named real-valued series, e.g. the fear-and-greed index."""

    name: str
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = _frozen(self.timestamps, np.int64)
        vals = _frozen(self.values, np.float64)
        if ts.shape != vals.shape or ts.ndim != 1:
            raise DataError(f"{self.name}: column lengths differ")
        _check_increasing(ts, self.name)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return int(self.timestamps.size)


def deviation(futures_price, spot_price):
    """Annualized log deviation ``1095 * (ln F - ln S)``.

    Accepts scalars or arrays. Raises ``ValueError`` on non-positive prices.
    """
    f = np.asarray(futures_price, dtype=np.float64)
    s = np.asarray(spot_price, dtype=np.float64)
    if np.any(~(f > 0)) or np.any(~(s > 0)):
        raise ValueError("prices must be positive")
    out = PERIODS_PER_YEAR * (np.log(f) - np.log(s))
    return float(out) if out.ndim == 0 else out


def moving_average(timestamps, values, window: int) -> np.ndarray:
    """Trailing time-window mean over ``(t - window, t]`` at every timestamp.

    Leading windows that reach back before the first observation average
    whatever data is available.
    """
    ts = np.asarray(timestamps, dtype=np.int64)
    v = np.asarray(values, dtype=np.float64)
    if window <= 0:
        raise ValueError("window must be positive")
    if ts.size == 0:
        raise ValueError("empty series")
    if ts.shape != v.shape:
        raise ValueError("timestamps and values differ in length")
    start = np.searchsorted(ts, ts - window, side="right")
    csum = np.concatenate(([0.0], np.cumsum(v)))
    idx = np.arange(1, ts.size + 1)
    return (csum[idx] - csum[start]) / (idx - start)


@dataclass(frozen=True)
class AlignedTable:
    """Inner join of several series on common timestamps."""

    timestamps: np.ndarray
    columns: dict[str, np.ndarray]

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]

    def matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = list(self.columns) if names is None else list(names)
        return np.column_stack([self.columns[n] for n in names])


def _columns_of(s) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    if isinstance(s, MarketSeries):
        return s.timestamps, {
            f"{s.asset_id}:futures": s.futures,
            f"{s.asset_id}:spot": s.spot,
            f"{s.asset_id}:rho": s.rho,
        }
    if isinstance(s, ExogenousSeries):
        return s.timestamps, {s.name: s.values}
    if isinstance(s, FundingSchedule):
        return s.timestamps, {f"{s.asset_id}:funding": s.rates}
    raise TypeError(f"cannot align {type(s).__name__}")


def align(series_list: Sequence) -> AlignedTable:
    """Inner-join series on timestamps.

    Market series contribute ``<asset>:futures``, ``<asset>:spot`` and
    ``<asset>:rho`` columns; exogenous series contribute their name.
    """
    if not series_list:
        raise ValueError("nothing to align")
    parts = [_columns_of(s) for s in series_list]
    common = parts[0][0]
    for ts, _ in parts[1:]:
        common = np.intersect1d(common, ts, assume_unique=True)
    if common.size == 0:
        raise DataError("aligned series have no timestamps in common")
    cols: dict[str, np.ndarray] = {}
    for ts, named in parts:
        idx = np.searchsorted(ts, common)
        for name, values in named.items():
            if name in cols:
                raise ValueError(f"duplicate column {name!r}")
            cols[name] = _frozen(values[idx], np.float64)
    return AlignedTable(_frozen(common, np.int64), cols)


# --------------------------------------------------------------------------
# CSV ingestion / emission
# --------------------------------------------------------------------------


def _read_rows(path: Path, header: tuple[str, ...]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise DataError("empty file", path=str(path)) from None
        if tuple(c.strip() for c in first) != header:
            raise DataError(f"expected header {','.join(header)}", line=1, path=str(path))
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"expected {len(header)} fields, got {len(row)}", reader.line_num, str(path))
            yield reader.line_num, row


def ingest_prices(path, asset_id: str, cadence: int = HOUR, max_gap: int | None = None) -> MarketSeries:
    """Read a ``timestamp,futures_price,spot_price`` CSV.

    Timestamps must be multiples of ``cadence`` and strictly increasing.
    Gaps are allowed and counted in ``gap_count``; with ``max_gap`` set
    (seconds), a larger spacing is an error.
    """
    path = Path(path)
    ts, fut, spot = [], [], []
    for line, row in _read_rows(path, PRICE_HEADER):
        try:
            t = parse_timestamp(row[0])
            f = _parse_float(row[1], "futures_price")
            s = _parse_float(row[2], "spot_price")
        except ValueError as exc:
            raise DataError(f"malformed row: {exc}", line, str(path)) from None
        for name, v, raw in (("futures_price", f, row[1]), ("spot_price", s, row[2])):
            if not math.isfinite(v) or v <= 0:
                raise DataError(f"{name} must be positive and finite, got {raw.strip()}", line, str(path))
        if t % cadence:
            raise DataError(f"timestamp {row[0].strip()} not aligned to cadence {cadence}s", line, str(path))
        if ts:
            step = t - ts[-1]
            if step == 0:
                raise DataError(f"duplicate timestamp {row[0].strip()}", line, str(path))
            if step < 0:
                raise DataError(f"timestamp {row[0].strip()} out of order", line, str(path))
            if max_gap is not None and step > max_gap:
                raise DataError(f"gap of {step}s exceeds tolerance {max_gap}s", line, str(path))
        ts.append(t)
        fut.append(f)
        spot.append(s)
    if not ts:
        raise DataError("no observations", path=str(path))
    return MarketSeries(asset_id, cadence, ts, fut, spot)


def ingest_funding(path, asset_id: str) -> FundingSchedule:
    """Read a ``timestamp,funding_rate`` CSV (rate per 8 hours, decimal fraction)."""
    path = Path(path)
    ts, rates = [], []
    for line, row in _read_rows(path, FUNDING_HEADER):
        try:
            t = parse_timestamp(row[0])
            rate = _parse_float(row[1], "funding_rate")
        except ValueError as exc:
            raise DataError(f"malformed row: {exc}", line, str(path)) from None
        if not math.isfinite(rate):
            raise DataError("non-finite funding rate", line, str(path))
        if t % EIGHT_HOURS:
            raise DataError(f"funding event {row[0].strip()} not at 00:00, 08:00 or 16:00 UTC", line, str(path))
        if ts and t <= ts[-1]:
            what = "duplicate" if t == ts[-1] else "out of order"
            raise DataError(f"{what} timestamp {row[0].strip()}", line, str(path))
        ts.append(t)
        rates.append(rate)
    return FundingSchedule(asset_id, ts, rates)


def ingest_exogenous(path, name: str) -> ExogenousSeries:
    """Read a ``timestamp,value`` CSV."""
    path = Path(path)
    ts, vals = [], []
    for line, row in _read_rows(path, EXOGENOUS_HEADER):
        try:
            t = parse_timestamp(row[0])
            v = _parse_float(row[1], "value")
        except ValueError as exc:
            raise DataError(f"malformed row: {exc}", line, str(path)) from None
        if ts and t <= ts[-1]:
            what = "duplicate" if t == ts[-1] else "out of order"
            raise DataError(f"{what} timestamp {row[0].strip()}", line, str(path))
        ts.append(t)
        vals.append(v)
    return ExogenousSeries(name, ts, vals)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_prices(series: MarketSeries, path) -> None:
    # repr() of a float round-trips exactly through float()
    _write_csv(path, PRICE_HEADER, (
        (format_timestamp(t), repr(float(f)), repr(float(s)))
        for t, f, s in zip(series.timestamps, series.futures, series.spot)
    ))


def emit_funding(schedule: FundingSchedule, path) -> None:
    _write_csv(path, FUNDING_HEADER, (
        (format_timestamp(t), repr(float(r))) for t, r in zip(schedule.timestamps, schedule.rates)
    ))


def emit_exogenous(series: ExogenousSeries, path) -> None:
    _write_csv(path, EXOGENOUS_HEADER, (
        (format_timestamp(t), repr(float(v))) for t, v in zip(series.timestamps, series.values)
    ))
