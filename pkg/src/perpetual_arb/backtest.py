"""Backtest execution and performance reports.

Returns are per unit of spot notional, one unit per leg. The risk-free
rate is left out of P&L. Fees are maker fees charged on both legs at every
open and close; funding cashflows carry no fee.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .accounting import Metrics, adjusted_sharpe, annualized_component, position_returns, summarize
from .marketdata import FundingSchedule, MarketSeries, format_timestamp, year_of
from .noarb import FeeTier
from .strategy import (
    RANDOM_MATURITY,
    StrategySpec,
    ThresholdChoice,
    rma_positions,
    rolling_thresholds,
    two_threshold_replay,
)

__all__ = [
    "BacktestReport",
    "Decomposition",
    "HourlyReturn",
    "adjusted_sharpe",
    "decompose",
    "run_backtest",
    "report_from_positions",
]


@dataclass(frozen=True)
class HourlyReturn:
    timestamp: int
    total: float
    price_component: float
    funding_component: float
    fee_component: float
    active: bool


@dataclass(frozen=True)
class Decomposition:
    """Annualized return split, in percent; the three parts sum to ``return_ann``."""

    price_total: float
    funding_total: float
    fee_total: float
    return_ann: float


@dataclass(frozen=True)
class BacktestReport:
    asset_id: str
    tier: str
    strategy: str
    timestamps: np.ndarray
    positions: np.ndarray
    price: np.ndarray
    funding: np.ndarray
    fee: np.ndarray
    total: np.ndarray
    active: np.ndarray
    overall: Metrics
    by_year: dict[int, Metrics]
    forced_close: bool
    actions: list[tuple[int, str]] = field(default_factory=list)
    thresholds: list[ThresholdChoice] = field(default_factory=list)

    @property
    def active_pct(self) -> float:
        return self.overall.active_pct

    @property
    def return_ann(self) -> float:
        return self.overall.return_ann

    @property
    def vol_ann(self) -> float:
        return self.overall.vol_ann

    @property
    def sharpe(self) -> float:
        return self.overall.sharpe

    def returns(self) -> Iterator[HourlyReturn]:
        for i in range(self.timestamps.size):
            yield HourlyReturn(int(self.timestamps[i]), float(self.total[i]), float(self.price[i]),
                               float(self.funding[i]), float(self.fee[i]), bool(self.active[i]))

    def to_dict(self) -> dict:
        dec = decompose(self)
        return {
            "asset": self.asset_id,
            "tier": self.tier,
            "strategy": self.strategy,
            "start": format_timestamp(self.timestamps[0]) if self.timestamps.size else None,
            "end": format_timestamp(self.timestamps[-1]) if self.timestamps.size else None,
            "forced_close": self.forced_close,
            "n_trades": sum(1 for _, a in self.actions if a != "close"),
            "overall": self.overall.as_dict(),
            "by_year": {str(y): m.as_dict() for y, m in sorted(self.by_year.items())},
            "decomposition": {
                "price": dec.price_total,
                "funding": dec.funding_total,
                "fee": dec.fee_total,
                "return": dec.return_ann,
            },
            "thresholds": [
                {"start": format_timestamp(c.start), "u": c.u, "l": c.l} for c in self.thresholds
            ],
        }


def report_from_positions(series: MarketSeries, schedule: FundingSchedule, positions, tier: FeeTier,
                          strategy: str = "custom", forced_close: bool = False, actions=None,
                          thresholds=None) -> BacktestReport:
    comp = position_returns(positions, series, schedule, tier.per_trade_cost)
    years = year_of(series.timestamps)
    by_year = {}
    for y in np.unique(years):
        m = years == y
        by_year[int(y)] = summarize(comp.total[m], comp.active[m])
    return BacktestReport(
        series.asset_id, tier.name, strategy, series.timestamps, np.asarray(positions, dtype=np.int8),
        comp.price, comp.funding, comp.fee, comp.total, comp.active,
        summarize(comp.total, comp.active), by_year, forced_close,
        list(actions or []), list(thresholds or []),
    )


def run_backtest(series: MarketSeries, schedule: FundingSchedule, spec: StrategySpec, tier: FeeTier,
                 executor=None) -> BacktestReport:
    """Simulate ``spec`` hour by hour on ``series``.

    Signals act at each observation's own prices. An open position is
    closed at the last observation (``forced_close``). Raises
    ``DataError`` if funding events are missing while a position is open.
    """
    thresholds: list[ThresholdChoice] = []
    if spec.kind == RANDOM_MATURITY:
        rp = rma_positions(series, spec.bounds, spec.close_target, spec.restriction)
        label = "random_maturity"
    elif spec.adaptive:
        thresholds, u, l = rolling_thresholds(series, schedule, tier, spec.restriction, spec.grid, executor)
        rp = two_threshold_replay(series, u, l, spec.restriction)
        label = "two_threshold_adaptive"
    else:
        rp = two_threshold_replay(series, spec.open_upper, spec.close_band, spec.restriction)
        label = "two_threshold"
    if spec.restriction != "unrestricted":
        label += f"/{spec.restriction}"
    return report_from_positions(series, schedule, rp.positions, tier, label, rp.forced_close, rp.actions,
                                 thresholds)


def decompose(report: BacktestReport) -> Decomposition:
    """Annualized price-convergence, funding and fee contributions, in percent."""
    if report.timestamps.size == 0:
        raise ValueError("empty report")
    return Decomposition(
        annualized_component(report.price, report.active),
        annualized_component(report.funding, report.active),
        annualized_component(report.fee, report.active),
        report.overall.return_ann,
    )


# --------------------------------------------------------------------------
# Emission
# --------------------------------------------------------------------------


def write_json(report: BacktestReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_returns_csv(report: BacktestReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "total", "price", "funding", "fee", "active"])
        for h in report.returns():
            w.writerow([format_timestamp(h.timestamp), repr(h.total), repr(h.price_component),
                        repr(h.funding_component), repr(h.fee_component), int(h.active)])


def _fmt(x: float, defined: bool = True) -> str:
    return f"{x:.1f}" if defined else "n/a"


def summary_table(reports: list[BacktestReport]) -> str:
    """Aligned-column text: Active %, Return, Volatility and SR per year and overall."""
    years = sorted({y for r in reports for y in r.by_year})
    cols = [str(y) for y in years] + ["All"]
    head = f"{'Asset':<8}{'Metric':<12}" + "".join(f"{c:>10}" for c in cols)
    lines = [head, "-" * len(head)]
    for r in reports:
        ms = [r.by_year.get(y) for y in years] + [r.overall]
        rows = [
            ("Active %", lambda m: _fmt(m.active_pct)),
            ("Return", lambda m: _fmt(m.return_ann)),
            ("Volatility", lambda m: _fmt(m.vol_ann)),
            ("SR", lambda m: f"{m.sharpe:.2f}" if m.sharpe_defined else "n/a"),
        ]
        for k, (name, f) in enumerate(rows):
            lab = r.asset_id if k == 0 else ""
            lines.append(f"{lab:<8}{name:<12}" + "".join(f"{(f(m) if m else ''):>10}" for m in ms))
    return "\n".join(lines) + "\n"


def decomposition_table(reports: list[BacktestReport]) -> str:
    head = f"{'Asset':<8}{'Return':>10}{'Price':>10}{'Funding':>10}{'Fee':>10}"
    lines = [head, "-" * len(head)]
    for r in reports:
        d = decompose(r)
        lines.append(f"{r.asset_id:<8}{d.return_ann:>10.1f}{d.price_total:>10.1f}"
                     f"{d.funding_total:>10.1f}{d.fee_total:>10.1f}")
    return "\n".join(lines) + "\n"
