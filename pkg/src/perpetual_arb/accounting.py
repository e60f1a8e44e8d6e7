"""Hourly P&L ledger for a position path, and the activity-adjusted Sharpe ratio.

Positions are encoded as integers: ``+1`` short futures / long spot,
``-1`` long futures / short spot, ``0`` flat. ``positions[i]`` is the
position held *after* the decisions taken at observation ``i``; the P&L
booked at ``i`` belongs to ``positions[i - 1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .marketdata import EIGHT_HOURS, HOURS_PER_YEAR, DataError, FundingSchedule, MarketSeries, format_timestamp


@dataclass(frozen=True)
class ReturnComponents:
    price: np.ndarray
    funding: np.ndarray
    fee: np.ndarray
    total: np.ndarray
    active: np.ndarray


def funding_per_observation(series: MarketSeries, schedule: FundingSchedule) -> tuple[np.ndarray, np.ndarray]:
    """Sum of funding rates paid in ``(t[i-1], t[i]]`` and whether that interval is fully covered.

    An interval is covered when the schedule holds an event for every
    8-hour boundary inside it.
    """
    ts = series.timestamps
    ev = schedule.timestamps
    pos = np.searchsorted(ev, ts, side="right")
    # event k is paid at the first observation at or after it
    owner = np.searchsorted(ts, ev, side="left")
    inside = (owner > 0) & (owner < ts.size)
    rates = np.bincount(owner[inside], weights=schedule.rates[inside], minlength=ts.size).astype(np.float64)
    covered = np.ones(ts.size, dtype=bool)
    if ts.size > 1:
        expected = ts[1:] // EIGHT_HOURS - ts[:-1] // EIGHT_HOURS
        covered[1:] = (pos[1:] - pos[:-1]) == expected
    return rates, covered


def position_returns(positions, series: MarketSeries, schedule: FundingSchedule,
                     per_trade_cost: float, funding: tuple[np.ndarray, np.ndarray] | None = None) -> ReturnComponents:
    """Per-observation price, funding and fee returns for a position path.

    Leg P&L is the difference of log returns, ``ln(S_t/S_{t-1}) - ln(F_t/F_{t-1})``
    for short futures / long spot. Each open or close costs
    ``per_trade_cost``; a direct flip counts as both.
    """
    p = np.asarray(positions, dtype=np.int8)
    n = len(series)
    if p.shape != (n,):
        raise ValueError("positions must have one entry per observation")
    held = np.zeros(n, dtype=np.float64)
    held[1:] = p[:-1]
    if funding is None:
        funding = funding_per_observation(series, schedule)
    rates, covered = funding
    missing = (held != 0) & ~covered
    if np.any(missing):
        i = int(np.flatnonzero(missing)[0])
        raise DataError(
            f"{series.asset_id}: funding schedule has a gap between {format_timestamp(series.timestamps[i - 1])} "
            f"and {format_timestamp(series.timestamps[i])} while a position is open"
        )
    log_basis = np.zeros(n)
    log_basis[1:] = np.diff(np.log(series.spot)) - np.diff(np.log(series.futures))
    price = held * log_basis
    fund = held * rates
    prev = np.concatenate(([0], p[:-1])).astype(np.int16)
    fee = -per_trade_cost * np.abs(p.astype(np.int16) - prev)
    # avoid -0.0 in flat hours
    price[held == 0] = 0.0
    fund[held == 0] = 0.0
    fee[fee == 0] = 0.0
    total = price + fund + fee
    active = (held != 0) | (p != 0)
    return ReturnComponents(price, fund, fee, total, active)


def adjusted_sharpe(active_returns, active_hours_per_year: float, hours_per_year: float = HOURS_PER_YEAR) -> float:
    """``(mu / sigma) * sqrt(N_a)`` from per-hour returns while the strategy is active.

    ``hours_per_year`` is accepted for symmetry with the annualization
    helpers; the scaling uses only ``active_hours_per_year``.
    """
    x = np.asarray(active_returns, dtype=np.float64)
    if x.size < 2:
        raise ValueError("need at least 2 active observations")
    if not 0 < active_hours_per_year <= hours_per_year:
        raise ValueError("active hours per year must lie in (0, hours_per_year]")
    sigma = float(np.std(x, ddof=1))
    if sigma == 0:
        raise ValueError("zero variance")
    return float(np.mean(x)) / sigma * math.sqrt(active_hours_per_year)


@dataclass(frozen=True)
class Metrics:
    """Annualized performance; ``return_ann`` and ``vol_ann`` in percent."""

    n_hours: int
    n_active: int
    active_pct: float
    return_ann: float
    vol_ann: float
    sharpe: float
    sharpe_defined: bool

    def as_dict(self) -> dict:
        return {
            "n_hours": self.n_hours,
            "n_active": self.n_active,
            "active_pct": self.active_pct,
            "return_ann": self.return_ann,
            "vol_ann": self.vol_ann,
            "sharpe": self.sharpe,
            "sharpe_defined": self.sharpe_defined,
        }


def active_hours_per_year(n_active: int, n_hours: int) -> float:
    return n_active * HOURS_PER_YEAR / n_hours


def summarize(total, active) -> Metrics:
    """Activity-adjusted annual return, volatility and Sharpe ratio.

    Mean and standard deviation are taken over active hours only and scaled
    by the average number of active hours per year, ``N_a``. With fewer
    than two active hours, or zero variance, the Sharpe ratio is reported
    as 0 with ``sharpe_defined`` false.
    """
    total = np.asarray(total, dtype=np.float64)
    active = np.asarray(active, dtype=bool)
    n = int(total.size)
    n_active = int(np.count_nonzero(active))
    if n == 0:
        return Metrics(0, 0, 0.0, 0.0, 0.0, 0.0, False)
    active_pct = 100.0 * n_active / n
    if n_active == 0:
        return Metrics(n, 0, 0.0, 0.0, 0.0, 0.0, False)
    x = total[active]
    na = active_hours_per_year(n_active, n)
    mu = float(np.mean(x))
    ret = 100.0 * mu * na
    if n_active < 2:
        return Metrics(n, n_active, active_pct, ret, 0.0, 0.0, False)
    sigma = float(np.std(x, ddof=1))
    vol = 100.0 * sigma * math.sqrt(na)
    if vol == 0:
        return Metrics(n, n_active, active_pct, ret, 0.0, 0.0, False)
    return Metrics(n, n_active, active_pct, ret, vol, ret / vol, True)


def annualized_component(component, active) -> float:
    """Annualized mean of one return component over active hours, in percent."""
    comp = np.asarray(component, dtype=np.float64)
    active = np.asarray(active, dtype=bool)
    n_active = int(np.count_nonzero(active))
    if n_active == 0:
        return 0.0
    return 100.0 * float(np.mean(comp[active])) * active_hours_per_year(n_active, comp.size)
