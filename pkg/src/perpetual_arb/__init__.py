"""No-arbitrage pricing and basis-arbitrage backtesting for crypto perpetual futures."""

from .marketdata import (
    DataError,
    ExogenousSeries,
    FundingSchedule,
    MarketSeries,
    align,
    deviation,
    ingest_exogenous,
    ingest_funding,
    ingest_prices,
    moving_average,
)
from .noarb import (
    FEE_TIERS,
    DeviationBounds,
    FeeTier,
    TheoryParams,
    benchmark_deviation,
    benchmark_price,
    bound_process,
    deviation_bounds,
    discounted_payoff,
    fee_tier,
)
from .funding import accrue_continuous, funding_cashflow, schedule_from_gaps
from .strategy import GridSearchConfig, StrategySpec, select_thresholds
from .backtest import BacktestReport, adjusted_sharpe, decompose, run_backtest
from .synth import SynthConfig, generate, rma_payoff_oracle

__version__ = "0.1.0"
