"""
How fees shrink the opportunity set
===================================
"""

from perpetual_arb import backtest, noarb
from perpetual_arb.strategy import StrategySpec
from perpetual_arb.synth import SynthConfig, generate

series, funding = generate(SynthConfig(seed=1, n_hours=24 * 270, gap_vol=10.0))

# same trades, different fee schedules
base = backtest.run_backtest(series, funding, StrategySpec.two_threshold(0.5, 0.1), noarb.FEE_TIERS["none"])
for name, tier in noarb.FEE_TIERS.items():
    rep = backtest.report_from_positions(series, funding, base.positions, tier)
    print(f"{name:<8} total {100 * rep.total.sum():7.2f}%")

# adaptive thresholds trade less as fees rise
for name, tier in noarb.FEE_TIERS.items():
    rep = backtest.run_backtest(series, funding, StrategySpec.adaptive_two_threshold(), tier)
    print(f"{name:<8} active {rep.active_pct:5.2f}%  SR {rep.sharpe:5.2f}")
