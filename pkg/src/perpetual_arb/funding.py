"""Funding value: continuous accrual, 8-hour schedules and per-event cashflows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .marketdata import (
    EIGHT_HOURS,
    HOUR,
    PERIODS_PER_YEAR,
    YEAR_SECONDS,
    DataError,
    FundingSchedule,
    MarketSeries,
    format_timestamp,
)
from .noarb import TheoryParams

LONG = "long"
SHORT = "short"


@dataclass(frozen=True)
class FundingAccrual:
    """Funding over an interval; positive ``amount`` means the long pays the short."""

    amount: float
    interval: tuple[int, int]

    @property
    def payer(self) -> str:
        return LONG if self.amount >= 0 else SHORT


def accrue_continuous(path: MarketSeries, params: TheoryParams = TheoryParams()) -> float:
    """``kappa * int (F - S) dt`` over the segment, time in years, trapezoid rule."""
    if len(path) < 2:
        raise ValueError("need at least 2 observations")
    years = (path.timestamps - path.timestamps[0]).astype(np.float64) / YEAR_SECONDS
    return float(params.kappa * np.trapezoid(path.futures - path.spot, years))


def accrual(path: MarketSeries, params: TheoryParams = TheoryParams()) -> FundingAccrual:
    return FundingAccrual(accrue_continuous(path, params), (int(path.timestamps[0]), int(path.timestamps[-1])))


def schedule_from_gaps(series: MarketSeries, params: TheoryParams = TheoryParams()) -> FundingSchedule:
    """Synthesize 8-hourly funding rates from the fractional futures-spot gap.

    The rate at each 00/08/16 UTC boundary is the unweighted mean of
    ``(F - S) / S`` over the hourly observations in the preceding 8 hours,
    scaled by ``kappa / 1095``. Boundaries whose window holds no data are
    skipped.
    """
    if series.cadence != HOUR:
        raise ValueError("schedule synthesis needs an hourly series")
    ts = series.timestamps
    if ts.size < 8:
        raise DataError(f"{series.asset_id}: need at least 8 hourly observations to synthesize funding")
    frac = (series.futures - series.spot) / series.spot
    first = (int(ts[0]) // EIGHT_HOURS + 1) * EIGHT_HOURS
    boundaries = np.arange(first, int(ts[-1]) + 1, EIGHT_HOURS, dtype=np.int64)
    lo = np.searchsorted(ts, boundaries - EIGHT_HOURS, side="left")
    hi = np.searchsorted(ts, boundaries, side="left")
    csum = np.concatenate(([0.0], np.cumsum(frac)))
    count = hi - lo
    keep = count > 0
    means = (csum[hi[keep]] - csum[lo[keep]]) / count[keep]
    scale = params.kappa / PERIODS_PER_YEAR
    return FundingSchedule(series.asset_id, boundaries[keep], means * scale)


def funding_cashflow(schedule: FundingSchedule, position_side: str, t: int) -> float:
    """Cashflow per unit futures notional at event ``t``: short receives the rate."""
    try:
        rate = schedule.rate_at(t)
    except KeyError:
        raise KeyError(f"{schedule.asset_id}: no funding event at {format_timestamp(t)}") from None
    if position_side == SHORT:
        return rate
    if position_side == LONG:
        return -rate
    raise ValueError(f"position side must be 'long' or 'short', got {position_side!r}")
