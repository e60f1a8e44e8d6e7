"""Trading signals for the two basis-arbitrage strategies and threshold selection.

Random-maturity strategy: open when the deviation leaves the no-arbitrage
band, close when it first returns to the frictionless benchmark.

Two-threshold strategy ``(u, l)``: short futures / long spot when
``rho > u``, long futures / short spot when ``rho < -u``, close when
``-l < rho < l``. ``(u, l)`` is re-selected at the start of every month by
grid search over the previous six months.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .accounting import funding_per_observation, position_returns, summarize
from .marketdata import FundingSchedule, MarketSeries, add_months, month_key
from .noarb import LONG_FUTURES_SHORT_SPOT, SHORT_FUTURES_LONG_SPOT, DeviationBounds, FeeTier

FLAT = "flat"
RANDOM_MATURITY = "random_maturity"
TWO_THRESHOLD = "two_threshold"
UNRESTRICTED = "unrestricted"
LONG_SPOT_ONLY = "long_spot_only"

OPEN_SHORT_FUT = "open_short_fut"
OPEN_LONG_FUT = "open_long_fut"
CLOSE = "close"
HOLD = "hold"

SIDE_CODE = {FLAT: 0, SHORT_FUTURES_LONG_SPOT: 1, LONG_FUTURES_SHORT_SPOT: -1}
CODE_SIDE = {v: k for k, v in SIDE_CODE.items()}


@dataclass(frozen=True)
class PositionState:
    side: str = FLAT
    entry_timestamp: int | None = None
    entry_futures: float | None = None
    entry_spot: float | None = None

    def __post_init__(self):
        if self.side not in SIDE_CODE:
            raise ValueError(f"unknown side {self.side!r}")
        populated = [v is not None for v in (self.entry_timestamp, self.entry_futures, self.entry_spot)]
        if self.side == FLAT and any(populated):
            raise ValueError("flat state carries no entry fields")
        if self.side != FLAT and not all(populated):
            raise ValueError("open state needs entry timestamp and prices")

    @property
    def is_flat(self) -> bool:
        return self.side == FLAT


@dataclass(frozen=True)
class GridSearchConfig:
    grid_min: float = 0.0
    grid_max: float = 2.0
    grid_step: float = 0.1
    lookback_months: int = 6

    def levels(self) -> list[float]:
        n = int(round((self.grid_max - self.grid_min) / self.grid_step))
        return [round(self.grid_min + k * self.grid_step, 12) for k in range(n + 1)]

    def candidates(self) -> list[tuple[float, float]]:
        """All ``(u, l)`` with ``u > l``, sorted by ``u`` then ``l``."""
        lv = self.levels()
        return [(u, l) for u in lv for l in lv if u > l]


@dataclass(frozen=True)
class StrategySpec:
    """Strategy parameters.

    For ``random_maturity``: enter outside ``[open_lower, open_upper]``,
    exit at ``close_target``. For ``two_threshold``: ``open_upper`` is
    ``u`` and ``close_band`` is ``l``; with ``adaptive`` set they are
    ignored and chosen by monthly grid search.
    """

    kind: str
    open_upper: float = 0.0
    open_lower: float = 0.0
    close_band: float = 0.0
    close_target: float = 0.0
    restriction: str = UNRESTRICTED
    adaptive: bool = False
    grid: GridSearchConfig = field(default_factory=GridSearchConfig)

    def __post_init__(self):
        if self.kind not in (RANDOM_MATURITY, TWO_THRESHOLD):
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.restriction not in (UNRESTRICTED, LONG_SPOT_ONLY):
            raise ValueError(f"unknown restriction {self.restriction!r}")
        if self.kind == RANDOM_MATURITY:
            if not self.open_lower <= self.close_target <= self.open_upper:
                raise ValueError("random-maturity spec needs open_lower <= close_target <= open_upper")
        elif not self.adaptive and not self.open_upper > self.close_band >= 0:
            raise ValueError("two-threshold spec needs u > l >= 0")

    @classmethod
    def random_maturity(cls, bounds: DeviationBounds, close_target: float,
                        restriction: str = UNRESTRICTED) -> "StrategySpec":
        return cls(RANDOM_MATURITY, open_upper=bounds.rho_u, open_lower=bounds.rho_l,
                   close_target=close_target, restriction=restriction)

    @classmethod
    def two_threshold(cls, u: float, l: float, restriction: str = UNRESTRICTED) -> "StrategySpec":
        return cls(TWO_THRESHOLD, open_upper=u, open_lower=-u, close_band=l, restriction=restriction)

    @classmethod
    def adaptive_two_threshold(cls, restriction: str = UNRESTRICTED,
                               grid: GridSearchConfig | None = None) -> "StrategySpec":
        return cls(TWO_THRESHOLD, restriction=restriction, adaptive=True, grid=grid or GridSearchConfig())

    @property
    def bounds(self) -> DeviationBounds:
        return DeviationBounds(self.open_lower, self.open_upper)


def rma_signal(rho: float, state: PositionState, bounds: DeviationBounds, close_target: float,
               restriction: str = UNRESTRICTED) -> str:
    if state.side == FLAT:
        if rho > bounds.rho_u:
            return OPEN_SHORT_FUT
        if rho < bounds.rho_l and restriction != LONG_SPOT_ONLY:
            return OPEN_LONG_FUT
        return HOLD
    if state.side == SHORT_FUTURES_LONG_SPOT:
        return CLOSE if rho <= close_target else HOLD
    return CLOSE if rho >= close_target else HOLD


def two_threshold_signal(rho: float, state: PositionState, u: float, l: float,
                         restriction: str = UNRESTRICTED) -> str:
    """Rule table for ``(u, l)``.

    An open position facing the opposite entry signal returns ``close``;
    the caller re-evaluates from flat to take the new side.
    """
    allow_long_fut = restriction != LONG_SPOT_ONLY
    if -l < rho < l:
        return HOLD if state.is_flat else CLOSE
    if state.side == FLAT:
        if rho > u:
            return OPEN_SHORT_FUT
        if rho < -u and allow_long_fut:
            return OPEN_LONG_FUT
        return HOLD
    if state.side == SHORT_FUTURES_LONG_SPOT and rho < -u and allow_long_fut:
        return CLOSE
    if state.side == LONG_FUTURES_SHORT_SPOT and rho > u:
        return CLOSE
    return HOLD


Signal = Callable[[int, float, PositionState], str]


@dataclass(frozen=True)
class Replay:
    positions: np.ndarray
    actions: list[tuple[int, str]]
    forced_close: bool


def replay(series: MarketSeries, signal: Signal) -> Replay:
    """Run a signal over every observation and record the position path.

    ``signal(i, rho_i, state)`` is called once per observation, and once
    more from flat after a close so a position can flip in the same hour.
    An open position is closed at the final observation.
    """
    rho = series.rho
    n = len(series)
    positions = np.zeros(n, dtype=np.int8)
    actions: list[tuple[int, str]] = []
    state = PositionState()
    for i in range(n):
        r = float(rho[i])
        act = signal(i, r, state)
        if act == CLOSE:
            actions.append((i, CLOSE))
            state = PositionState()
            act = signal(i, r, state)
            if act == CLOSE:
                act = HOLD
        if act in (OPEN_SHORT_FUT, OPEN_LONG_FUT):
            if not state.is_flat:
                raise RuntimeError(f"signal opened a position while {state.side} at observation {i}")
            side = SHORT_FUTURES_LONG_SPOT if act == OPEN_SHORT_FUT else LONG_FUTURES_SHORT_SPOT
            state = PositionState(side, int(series.timestamps[i]), float(series.futures[i]), float(series.spot[i]))
            actions.append((i, act))
        positions[i] = SIDE_CODE[state.side]
    forced = False
    if n and positions[-1] != 0:
        positions[-1] = 0
        actions.append((n - 1, CLOSE))
        forced = True
    return Replay(positions, actions, forced)


def rma_positions(series: MarketSeries, bounds: DeviationBounds, close_target: float,
                  restriction: str = UNRESTRICTED) -> Replay:
    return replay(series, lambda i, r, st: rma_signal(r, st, bounds, close_target, restriction))


def two_threshold_replay(series: MarketSeries, u, l, restriction: str = UNRESTRICTED) -> Replay:
    """Signal-by-signal replay; ``u`` and ``l`` may be per-observation arrays (NaN = stay flat)."""
    n = len(series)
    ua = np.broadcast_to(np.asarray(u, dtype=np.float64), (n,))
    la = np.broadcast_to(np.asarray(l, dtype=np.float64), (n,))

    def signal(i, r, st):
        if np.isnan(ua[i]):
            return HOLD if st.is_flat else CLOSE
        return two_threshold_signal(r, st, float(ua[i]), float(la[i]), restriction)

    return replay(series, signal)


def two_threshold_positions(rho, u, l, restriction: str = UNRESTRICTED) -> np.ndarray:
    """Vectorized position path for the two-threshold rule, final position flat.

    Every observation either forces a side (entry or close region) or
    keeps the previous one, so the path is a forward fill of the forced
    labels. Matches :func:`two_threshold_replay`.
    """
    rho = np.asarray(rho, dtype=np.float64)
    n = rho.size
    u = np.broadcast_to(np.asarray(u, dtype=np.float64), (n,))
    l = np.broadcast_to(np.asarray(l, dtype=np.float64), (n,))
    label = np.full(n, np.nan)
    label[rho > u] = 1.0
    if restriction != LONG_SPOT_ONLY:
        label[rho < -u] = -1.0
    label[(rho > -l) & (rho < l)] = 0.0
    label[np.isnan(u)] = 0.0
    have = ~np.isnan(label)
    idx = np.where(have, np.arange(n), -1)
    np.maximum.accumulate(idx, out=idx)
    out = np.where(idx >= 0, label[np.maximum(idx, 0)], 0.0).astype(np.int8)
    if n:
        out[-1] = 0
    return out


def _score(rho, series, schedule, funding, per_trade_cost, restriction, pair) -> float:
    u, l = pair
    pos = two_threshold_positions(rho, u, l, restriction)
    comp = position_returns(pos, series, schedule, per_trade_cost, funding)
    m = summarize(comp.total, comp.active)
    return m.sharpe if m.sharpe_defined else -np.inf


def select_thresholds(history: MarketSeries, schedule: FundingSchedule, config: GridSearchConfig,
                      tier: FeeTier, restriction: str = UNRESTRICTED,
                      candidates: Sequence[tuple[float, float]] | None = None,
                      executor=None) -> tuple[float, float]:
    """Best ``(u, l)`` by adjusted Sharpe ratio over ``history``.

    Candidates with no defined Sharpe ratio score ``-inf``. Ties go to the
    smaller ``u``, then the smaller ``l``, whatever the candidate order or
    ``executor`` (any object with a ``map`` method).
    """
    if len(history) < 2:
        raise ValueError("insufficient history for threshold selection")
    pairs = sorted(config.candidates() if candidates is None else candidates)
    rho = history.rho
    funding = funding_per_observation(history, schedule)

    def score(pair):
        return _score(rho, history, schedule, funding, tier.per_trade_cost, restriction, pair)

    scores = list(map(score, pairs) if executor is None else executor.map(score, pairs))
    best = int(np.argmax(scores))  # first maximum = smallest (u, l)
    return pairs[best]


@dataclass(frozen=True)
class ThresholdChoice:
    start: int
    u: float
    l: float


def rolling_thresholds(series: MarketSeries, schedule: FundingSchedule, tier: FeeTier,
                       restriction: str = UNRESTRICTED, config: GridSearchConfig | None = None,
                       executor=None) -> tuple[list[ThresholdChoice], np.ndarray, np.ndarray]:
    """Monthly re-selected thresholds and their per-observation arrays.

    Each month starts at its first observation; thresholds use the data in
    the preceding ``lookback_months`` calendar months. Months without a
    full lookback stay flat (``NaN`` thresholds).
    """
    config = config or GridSearchConfig()
    ts = series.timestamps
    n = ts.size
    u_arr = np.full(n, np.nan)
    l_arr = np.full(n, np.nan)
    choices: list[ThresholdChoice] = []
    if n == 0:
        return choices, u_arr, l_arr
    keys = [month_key(t) for t in ts]
    starts = [0] + [i for i in range(1, n) if keys[i] != keys[i - 1]]
    bounds = starts[1:] + [n]
    first = int(ts[0])
    for i0, i1 in zip(starts, bounds):
        anchor = int(ts[i0])
        window_start = add_months(anchor, -config.lookback_months)
        if window_start < first:
            continue
        hist = series.between(window_start, anchor)
        if len(hist) < 2:
            continue
        u, l = select_thresholds(hist, schedule.between(window_start, anchor), config, tier,
                                 restriction, executor=executor)
        choices.append(ThresholdChoice(anchor, u, l))
        u_arr[i0:i1] = u
        l_arr[i0:i1] = l
    return choices, u_arr, l_arr
