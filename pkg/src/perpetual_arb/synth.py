"""Synthetic futures/spot markets with a bounded, mean-reverting deviation.

Random numbers come from xorshift64* (shifts 12, 25, 27; multiplier
0x2545F4914F6CDD1D), seeded per path with one splitmix64 step applied to
``seed + (path_index + 1) * 0x9E3779B97F4A7C15``. Uniforms use the top 53
bits; normals use the cosine branch of Box-Muller on two consecutive
uniforms, the first mapped to (0, 1]. Every hourly step draws the spot
shock first, then the deviation shock. The same seed therefore gives the
same paths regardless of how many paths are generated at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .funding import schedule_from_gaps
from .marketdata import HOUR, HOURS_PER_YEAR, PERIODS_PER_YEAR, FundingSchedule, MarketSeries
from .noarb import LONG_FUTURES_SHORT_SPOT, SHORT_FUTURES_LONG_SPOT, DeviationBounds, TheoryParams, payoff_path

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_XS_MULT = np.uint64(0x2545F4914F6CDD1D)
_TWO_POW_M53 = 2.0 ** -53


def _splitmix64(x: int) -> int:
    z = (x + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class XorShift64Star:
    """Vector of independent xorshift64* streams, one per path."""

    def __init__(self, seed: int, path_indices):
        states = []
        for k in np.atleast_1d(path_indices):
            s = _splitmix64((int(seed) + (int(k) + 1) * _GOLDEN) & _MASK)
            states.append(s or _GOLDEN)
        self.state = np.array(states, dtype=np.uint64)

    def next_uint64(self) -> np.ndarray:
        x = self.state
        x ^= x >> np.uint64(12)
        x ^= x << np.uint64(25)
        x ^= x >> np.uint64(27)
        self.state = x
        return x * _XS_MULT

    def uniform(self) -> np.ndarray:
        """Uniform on [0, 1)."""
        return (self.next_uint64() >> np.uint64(11)).astype(np.float64) * _TWO_POW_M53

    def normal(self) -> np.ndarray:
        u1 = ((self.next_uint64() >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_POW_M53
        u2 = self.uniform()
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic market; rates and volatilities are annual.

    The deviation follows an Euler-discretized mean-reverting process in
    annualized units, reflected at ``+-gap_bound``.
    """

    seed: int = 0
    n_hours: int = 24 * 365
    spot_vol: float = 0.6
    spot_drift: float = 0.0
    gap_mean: float = 0.1095
    gap_reversion: float = 50.0
    gap_vol: float = 3.0
    gap_bound: float = 3.0
    initial_rho: float | None = None
    initial_spot: float = 10000.0
    start: int = 1577836800  # 2020-01-01T00:00:00Z
    asset_id: str = "SYN"

    def __post_init__(self):
        if not 0 <= self.seed <= _MASK:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.n_hours < 8:
            raise ValueError("n_hours must be at least 8")
        if not self.gap_bound > 0:
            raise ValueError("gap_bound must be positive")
        if self.spot_vol < 0 or self.gap_vol < 0 or self.gap_reversion < 0:
            raise ValueError("volatilities and reversion speed must be non-negative")
        if not self.initial_spot > 0:
            raise ValueError("initial_spot must be positive")
        if abs(self.rho0) > self.gap_bound:
            raise ValueError("initial deviation lies outside the gap bound")
        if self.start % HOUR:
            raise ValueError("start must be on the hour")

    @property
    def rho0(self) -> float:
        return self.gap_mean if self.initial_rho is None else self.initial_rho


def _reflect(x: np.ndarray, bound: float) -> np.ndarray:
    for _ in range(64):
        hi = x > bound
        lo = x < -bound
        if not (hi.any() or lo.any()):
            return x
        x = np.where(hi, 2 * bound - x, x)
        x = np.where(lo, -2 * bound - x, x)
    return np.clip(x, -bound, bound)


def generate_paths(config: SynthConfig, n_paths: int = 1, first_path: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Spot prices and deviations, each of shape ``(n_paths, n_hours)``."""
    rng = XorShift64Star(config.seed, np.arange(first_path, first_path + n_paths))
    n = config.n_hours
    dt = 1.0 / HOURS_PER_YEAR
    sdt = np.sqrt(dt)
    log_s = np.empty((n_paths, n))
    rho = np.empty((n_paths, n))
    log_s[:, 0] = np.log(config.initial_spot)
    rho[:, 0] = config.rho0
    drift = (config.spot_drift - 0.5 * config.spot_vol ** 2) * dt
    for i in range(1, n):
        z_spot = rng.normal()
        z_gap = rng.normal()
        log_s[:, i] = log_s[:, i - 1] + drift + config.spot_vol * sdt * z_spot
        step = config.gap_reversion * (config.gap_mean - rho[:, i - 1]) * dt + config.gap_vol * sdt * z_gap
        rho[:, i] = _reflect(rho[:, i - 1] + step, config.gap_bound)
    return np.exp(log_s), rho


def generate(config: SynthConfig, params: TheoryParams = TheoryParams()) -> tuple[MarketSeries, FundingSchedule]:
    """One synthetic hourly market (path 0) and its gap-implied funding schedule."""
    spot, rho = generate_paths(config, 1)
    spot, rho = spot[0], rho[0]
    futures = spot * np.exp(rho / PERIODS_PER_YEAR)
    ts = config.start + HOUR * np.arange(config.n_hours, dtype=np.int64)
    series = MarketSeries(config.asset_id, HOUR, ts, futures, spot)
    return series, schedule_from_gaps(series, params)


@dataclass(frozen=True)
class OracleResult:
    side: str
    n_paths: int
    fraction_positive: float
    first_positive_hours: np.ndarray  # NaN where the payoff never turned positive
    max_abs_payoff: float


def rma_payoff_oracle(config: SynthConfig, n_paths: int, entry_rule: DeviationBounds,
                      params: TheoryParams = TheoryParams(), round_trip_cost: float = 0.0,
                      side: str | None = None, chunk: int = 200) -> OracleResult:
    """Monte-Carlo check that a trade entered outside the band pays off at some time.

    Every path starts at ``config.rho0``. The trade is short futures / long
    spot above ``entry_rule.rho_u`` and the reverse below ``rho_l``; pass
    ``side`` to force a side when the start lies inside the band. Payoffs
    are discounted at ``params.r`` and net of ``round_trip_cost``.
    """
    rho0 = config.rho0
    if side is None:
        if rho0 > entry_rule.rho_u:
            side = SHORT_FUTURES_LONG_SPOT
        elif rho0 < entry_rule.rho_l:
            side = LONG_FUTURES_SHORT_SPOT
        else:
            raise ValueError("initial deviation lies inside the entry band; pass side explicitly")
    years = np.arange(config.n_hours, dtype=np.float64) / HOURS_PER_YEAR
    first = np.full(n_paths, np.nan)
    max_abs = 0.0
    for start in range(0, n_paths, chunk):
        k = min(chunk, n_paths - start)
        spot, rho = generate_paths(config, k, start)
        futures = spot * np.exp(rho / PERIODS_PER_YEAR)
        pay = payoff_path(side, years, futures, spot, params, round_trip_cost)
        max_abs = max(max_abs, float(np.max(np.abs(pay))))
        hit = pay > 0
        any_hit = hit.any(axis=1)
        first[start:start + k] = np.where(any_hit, np.argmax(hit, axis=1), np.nan)
    frac = float(np.mean(~np.isnan(first)))
    return OracleResult(side, n_paths, frac, first, max_abs)
