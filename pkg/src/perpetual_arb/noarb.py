"""No-arbitrage pricing of perpetual futures.

Benchmark price ``F = S (1 + r/kappa)``, the trading-cost band for the
annualized deviation, the closed-form bound process solving the integral
equation ``u(t) = e^{-rt} F0 - S0 + kappa * int_0^t u(s) ds``, and the
discounted payoff of the two basis trades.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .marketdata import PERIODS_PER_YEAR, YEAR_SECONDS, MarketSeries

SHORT_FUTURES_LONG_SPOT = "short_futures_long_spot"
LONG_FUTURES_SHORT_SPOT = "long_futures_short_spot"
SIDES = (SHORT_FUTURES_LONG_SPOT, LONG_FUTURES_SHORT_SPOT)


@dataclass(frozen=True)
class TheoryParams:
    """Risk-free rate ``r`` (continuous, per year) and funding scale ``kappa`` (per year).

    The default rate is the 0.01% 8-hour rate annualized (0.1095).
    """

    r: float = 0.1095
    kappa: float = 1095.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.r >= 0:
            raise ValueError("r must be non-negative")
        if not self.r < self.kappa:
            raise ValueError("r must be smaller than kappa")

    @property
    def carry(self) -> float:
        """``r / kappa``: the benchmark futures premium as a fraction of spot."""
        return self.r / self.kappa


@dataclass(frozen=True)
class FeeTier:
    """Maker fees per leg per trade, as fractions of notional."""

    name: str
    spot_fee: float
    futures_fee: float

    def __post_init__(self):
        if self.spot_fee < 0 or self.futures_fee < 0:
            raise ValueError("fees must be non-negative")

    @property
    def per_trade_cost(self) -> float:
        """Cost of opening (or closing) both legs once."""
        return self.spot_fee + self.futures_fee

    @property
    def round_trip_cost(self) -> float:
        return 2.0 * (self.spot_fee + self.futures_fee)


FEE_TIERS: dict[str, FeeTier] = {
    "none": FeeTier("none", 0.0, 0.0),
    "low": FeeTier("low", 0.000225, 0.000018),
    "medium": FeeTier("medium", 0.00045, 0.000072),
    "high": FeeTier("high", 0.000675, 0.000144),
}


def fee_tier(name: str) -> FeeTier:
    try:
        return FEE_TIERS[name]
    except KeyError:
        raise ValueError(f"unknown fee tier {name!r}; choose from {', '.join(FEE_TIERS)}") from None


@dataclass(frozen=True)
class DeviationBounds:
    """No-arbitrage band ``[rho_l, rho_u]`` for the annualized deviation."""

    rho_l: float
    rho_u: float

    def __post_init__(self):
        if self.rho_l > self.rho_u:
            raise ValueError("rho_l must not exceed rho_u")

    @property
    def width(self) -> float:
        return self.rho_u - self.rho_l


def benchmark_price(spot_price, params: TheoryParams = TheoryParams()):
    s = np.asarray(spot_price, dtype=np.float64)
    if np.any(~(s > 0)):
        raise ValueError("spot price must be positive")
    out = s * (1.0 + params.carry)
    return float(out) if out.ndim == 0 else out


def benchmark_deviation(params: TheoryParams = TheoryParams()) -> float:
    """Annualized deviation of the frictionless benchmark price from spot."""
    return PERIODS_PER_YEAR * math.log1p(params.carry)


def deviation_bounds(params: TheoryParams, tier: FeeTier) -> DeviationBounds:
    """``rho = 1095 * ln(1 + r/kappa -+ C)`` with ``C`` the round-trip cost."""
    c = tier.round_trip_cost
    lo_arg = 1.0 + params.carry - c
    if lo_arg <= 0:
        raise ValueError(f"round-trip cost {c} too large: bound argument {lo_arg} is not positive")
    # log1p keeps the zero-fee band exactly degenerate
    return DeviationBounds(
        PERIODS_PER_YEAR * math.log1p(params.carry - c),
        PERIODS_PER_YEAR * math.log1p(params.carry + c),
    )


def bound_process(t, F0: float, S0: float, params: TheoryParams = TheoryParams()):
    """Closed-form solution of ``u(t) = e^{-rt} F0 - S0 + kappa * int_0^t u ds``.

    Serves both as the lower bound (futures rich) and the upper bound
    (futures cheap) of the discounted gap; it diverges unless
    ``F0 = S0 (1 + r/kappa)``.
    """
    tt = np.asarray(t, dtype=np.float64)
    if np.any(tt < 0):
        raise ValueError("t must be non-negative")
    r, k = params.r, params.kappa
    c = F0 / (1.0 + r / k) - S0
    out = F0 * r * np.exp(-r * tt) / (k + r)
    if c != 0.0:
        # the divergent mode may overflow to +-inf, which is the right limit
        with np.errstate(over="ignore"):
            out = out + c * np.exp(k * tt)
    return float(out) if out.ndim == 0 else out


def _side_sign(side: str) -> float:
    if side == SHORT_FUTURES_LONG_SPOT:
        return 1.0
    if side == LONG_FUTURES_SHORT_SPOT:
        return -1.0
    raise ValueError(f"unknown side {side!r}")


def payoff_path(side: str, times, futures, spot, params: TheoryParams = TheoryParams(),
                round_trip_cost: float = 0.0) -> np.ndarray:
    """Discounted payoff of a basis trade entered at ``times[0]``, at every later time.

    Works on 1-d arrays (one path) or 2-d arrays with time on the last axis.
    ``times`` are in years. The funding integral uses the trapezoid rule on
    the observation grid. ``round_trip_cost`` (fraction of entry spot
    notional) is deducted once.
    """
    t = np.asarray(times, dtype=np.float64)
    f = np.asarray(futures, dtype=np.float64)
    s = np.asarray(spot, dtype=np.float64)
    if t.shape[-1] < 2:
        raise ValueError("need at least 2 observations")
    tau = t - t[..., :1]
    disc = np.exp(-params.r * tau)
    gap = f - s
    f0 = f[..., :1]
    s0 = s[..., :1]
    funding = params.kappa * cumulative_trapezoid(gap * disc, tau, axis=-1, initial=0.0)
    long_spot = disc * (f0 - gap) - s0 + funding
    return _side_sign(side) * long_spot - round_trip_cost * s0


def discounted_payoff(side: str, path: MarketSeries, entry_index: int, exit_index: int,
                      params: TheoryParams = TheoryParams(), round_trip_cost: float = 0.0) -> float:
    """Discounted payoff at ``exit_index`` of the trade opened at ``entry_index``.

    Short futures / long spot pays
    ``e^{-rt} F0 - e^{-rt} (Ft - St) - S0 + kappa * int_0^t (Fs - Ss) e^{-rs} ds``;
    the opposite trade pays the negation.
    """
    n = len(path)
    if n < 2:
        raise ValueError("need at least 2 observations")
    if not 0 <= entry_index < exit_index < n:
        raise ValueError("require 0 <= entry_index < exit_index < len(path)")
    sl = slice(entry_index, exit_index + 1)
    years = (path.timestamps[sl] - path.timestamps[entry_index]).astype(np.float64) / YEAR_SECONDS
    values = payoff_path(side, years, path.futures[sl], path.spot[sl], params, round_trip_cost)
    return float(values[-1])
