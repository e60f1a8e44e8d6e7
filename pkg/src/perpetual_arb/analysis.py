"""Empirical analytics: correlations, OLS with Newey-West t-stats, event study."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .marketdata import (
    DAY,
    MINUTE,
    PERIODS_PER_YEAR,
    YEAR_SECONDS,
    AlignedTable,
    DataError,
    ExogenousSeries,
    FundingSchedule,
    MarketSeries,
    add_months,
)
from .noarb import FeeTier


def correlation_matrix(aligned: AlignedTable | np.ndarray, names: Sequence[str] | None = None):
    """Pearson correlation matrix of the columns.

    Returns ``(names, matrix)``. Raises on fewer than 2 columns or 3 rows,
    and on any constant column.
    """
    if isinstance(aligned, AlignedTable):
        names = list(aligned.columns) if names is None else list(names)
        x = aligned.matrix(names)
    else:
        x = np.asarray(aligned, dtype=np.float64)
        names = [f"x{i}" for i in range(x.shape[1])] if names is None else list(names)
    if x.ndim != 2 or x.shape[1] < 2 or x.shape[0] < 3:
        raise ValueError("need at least 2 columns and 3 rows")
    sd = x.std(axis=0)
    if np.any(sd == 0):
        raise ValueError(f"zero-variance column {names[int(np.flatnonzero(sd == 0)[0])]!r}")
    c = np.corrcoef(x, rowvar=False)
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return names, c


def daily_sample(series: MarketSeries) -> MarketSeries:
    """Observations stamped exactly 00:00 UTC."""
    keep = np.flatnonzero(series.timestamps % DAY == 0)
    return MarketSeries(series.asset_id, DAY, series.timestamps[keep], series.futures[keep], series.spot[keep])


def past_return_regressor(spot: MarketSeries, lookback_months: int = 4) -> ExogenousSeries:
    """Annualized mean log spot return over the trailing ``lookback_months``, daily at 00:00 UTC.

    The window for day ``t`` starts at the first observation at or after
    ``t`` minus ``lookback_months`` calendar months. Days whose window
    reaches before the data are dropped.
    """
    ts = spot.timestamps
    logs = np.log(spot.spot)
    days = np.flatnonzero(ts % DAY == 0)
    out_t, out_v = [], []
    for i in days:
        t = int(ts[i])
        t0 = add_months(t, -lookback_months)
        if t0 < ts[0]:
            continue
        j = int(np.searchsorted(ts, t0))
        if j >= i:
            continue
        years = (t - int(ts[j])) / YEAR_SECONDS
        out_t.append(t)
        out_v.append((logs[i] - logs[j]) / years)
    if not out_t:
        raise DataError(f"{spot.asset_id}: history shorter than {lookback_months} months")
    return ExogenousSeries(f"{spot.asset_id}:ret{lookback_months}m", out_t, out_v)


@dataclass(frozen=True)
class RegressionResult:
    names: list[str]
    coefficients: np.ndarray
    std_errors: np.ndarray
    hac_t_stats: np.ndarray
    r_squared: float
    n: int
    lag: int
    residuals: np.ndarray

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def t_stat(self, name: str) -> float:
        return float(self.hac_t_stats[self.names.index(name)])

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "lag": self.lag,
            "r_squared": self.r_squared,
            "coefficients": {k: float(v) for k, v in zip(self.names, self.coefficients)},
            "std_errors": {k: float(v) for k, v in zip(self.names, self.std_errors)},
            "t_stats": {k: float(v) for k, v in zip(self.names, self.hac_t_stats)},
        }


def newey_west_lag(n: int) -> int:
    return int(math.floor(4 * (n / 100) ** (2 / 9)))


def newey_west_cov(X: np.ndarray, resid: np.ndarray, lag: int) -> np.ndarray:
    """Bartlett-kernel HAC covariance of OLS coefficients, no small-sample correction."""
    xe = X * resid[:, None]
    meat = xe.T @ xe
    for j in range(1, lag + 1):
        w = 1.0 - j / (lag + 1)
        g = xe[j:].T @ xe[:-j]
        meat += w * (g + g.T)
    bread = np.linalg.inv(X.T @ X)
    return bread @ meat @ bread


def ols_hac(y, X, lag: int | None = None, names: Sequence[str] | None = None,
            add_constant: bool = True) -> RegressionResult:
    """OLS of ``y`` on ``X`` with Newey-West t-statistics.

    ``X`` is a 2-d array or a mapping of column name to values. A constant
    named ``const`` is appended unless ``add_constant`` is false. ``lag``
    defaults to ``floor(4 (n/100)^(2/9))``.
    """
    if isinstance(X, Mapping):
        names = list(X) if names is None else list(names)
        Xm = np.column_stack([np.asarray(X[k], dtype=np.float64) for k in names])
    else:
        Xm = np.asarray(X, dtype=np.float64)
        if Xm.ndim == 1:
            Xm = Xm[:, None]
        names = [f"x{i}" for i in range(Xm.shape[1])] if names is None else list(names)
    y = np.asarray(y, dtype=np.float64)
    if add_constant:
        Xm = np.column_stack([Xm, np.ones(Xm.shape[0])])
        names = names + ["const"]
    n, k = Xm.shape
    if y.shape != (n,):
        raise ValueError("y and X differ in length")
    if not np.all(np.isfinite(Xm)) or not np.all(np.isfinite(y)):
        raise ValueError("non-finite values in regression data")
    if n <= k:
        raise ValueError(f"need more observations ({n}) than regressors ({k})")
    q, r = np.linalg.qr(Xm)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-12 * max(diag.max(), 1.0):
        raise np.linalg.LinAlgError("singular design matrix")
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - Xm @ beta
    lag = newey_west_lag(n) if lag is None else int(lag)
    if lag < 0:
        raise ValueError("lag must be non-negative")
    cov = newey_west_cov(Xm, resid, lag)
    se = np.sqrt(np.diag(cov))
    ss_res = float(resid @ resid)
    yc = y - y.mean()
    ss_tot = float(yc @ yc)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    return RegressionResult(names, beta, se, t, r2, n, lag, resid)


def regression_table(results: Mapping[str, RegressionResult], rows: Sequence[str] | None = None) -> str:
    """Columns per regression, coefficients with HAC t-stats in parentheses beneath."""
    labels = list(results)
    if rows is None:
        rows = []
        for res in results.values():
            rows += [n for n in res.names if n not in rows and n != "const"]
        rows.append("const")
    width = max(12, *(len(l) + 2 for l in labels))
    lines = [f"{'':<14}" + "".join(f"{l:>{width}}" for l in labels)]
    for name in rows:
        coef_cells, t_cells = [], []
        for res in results.values():
            if name in res.names:
                coef_cells.append(f"{res.coef(name):.3f}")
                t_cells.append(f"({res.t_stat(name):.2f})")
            else:
                coef_cells.append("")
                t_cells.append("")
        lines.append(f"{name:<14}" + "".join(f"{c:>{width}}" for c in coef_cells))
        lines.append(f"{'':<14}" + "".join(f"{c:>{width}}" for c in t_cells))
    lines.append(f"{'R2':<14}" + "".join(f"{r.r_squared:>{width}.3f}" for r in results.values()))
    lines.append(f"{'N':<14}" + "".join(f"{r.n:>{width}d}" for r in results.values()))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Funding-payment event study
# --------------------------------------------------------------------------

EVENT_WINDOW = 240


@dataclass(frozen=True)
class EventStudyResult:
    offsets: np.ndarray
    mean_cum_returns_positive: np.ndarray
    mean_cum_returns_negative: np.ndarray
    se_cum_returns_positive: np.ndarray
    se_cum_returns_negative: np.ndarray
    event_counts: tuple[int, int]
    skipped: int

    @property
    def window_minutes(self) -> int:
        return EVENT_WINDOW


def _event_windows(series: MarketSeries, schedule: FundingSchedule, before: int, after: int):
    """Index of each event's window start in ``series`` where all minutes are present."""
    if series.cadence != MINUTE:
        raise ValueError("event analysis needs a minute series")
    ts = series.timestamps
    width = before + after
    for t, rate in zip(schedule.timestamps, schedule.rates):
        start = int(t) - before * MINUTE
        i = int(np.searchsorted(ts, start))
        j = i + width
        ok = j < ts.size and ts[i] == start and ts[j] == int(t) + after * MINUTE
        yield int(t), float(rate), (i if ok else None)


def event_study(minute_series: MarketSeries, schedule: FundingSchedule,
                window: int = EVENT_WINDOW) -> EventStudyResult:
    """Mean cumulative ex-funding return of the rate-matched hedge around each payment.

    For a positive rate the hedge is short futures / long spot, for a
    negative rate the reverse. Minute returns are cumulated from
    ``-window`` minutes, so every curve starts at exactly 0. Events
    without full minute coverage, or with a zero rate, are skipped.
    """
    log_basis = np.log(minute_series.spot) - np.log(minute_series.futures)
    pos, neg = [], []
    skipped = 0
    for _, rate, i in _event_windows(minute_series, schedule, window, window):
        if i is None or rate == 0:
            skipped += 1
            continue
        seg = log_basis[i:i + 2 * window + 1]
        cum = seg - seg[0]
        (pos if rate > 0 else neg).append(cum if rate > 0 else -cum)
    if not pos and not neg:
        raise DataError("no funding events with full minute coverage")

    def stats(curves):
        if not curves:
            nan = np.full(2 * window + 1, np.nan)
            return nan, nan
        a = np.vstack(curves)
        se = a.std(axis=0, ddof=1) / math.sqrt(a.shape[0]) if a.shape[0] > 1 else np.full(a.shape[1], np.nan)
        return a.mean(axis=0), se

    mp, sp = stats(pos)
    mn, sn = stats(neg)
    offsets = np.arange(-window, window + 1)
    return EventStudyResult(offsets, mp, mn, sp, sn, (len(pos), len(neg)), skipped)


@dataclass(frozen=True)
class CaptureSummary:
    n_events: int
    skipped: int
    mean_return: float
    annualized_return: float
    per_event: np.ndarray


def funding_capture_backtest(minute_series: MarketSeries, schedule: FundingSchedule, tier: FeeTier,
                             offset_minutes: int = 5) -> CaptureSummary:
    """Open the rate-matched hedge ``offset_minutes`` before each payment, close it the same time after.

    Per-event return = hedge price return + |rate| - round-trip fees.
    ``annualized_return`` is the mean times 1095 events per year.
    """
    log_basis = np.log(minute_series.spot) - np.log(minute_series.futures)
    rets = []
    skipped = 0
    for _, rate, i in _event_windows(minute_series, schedule, offset_minutes, offset_minutes):
        if i is None or rate == 0:
            skipped += 1
            continue
        sign = 1.0 if rate > 0 else -1.0
        move = log_basis[i + 2 * offset_minutes] - log_basis[i]
        rets.append(sign * move + abs(rate) - tier.round_trip_cost)
    per_event = np.asarray(rets)
    mean = float(per_event.mean()) if per_event.size else 0.0
    return CaptureSummary(int(per_event.size), skipped, mean, mean * PERIODS_PER_YEAR, per_event)
