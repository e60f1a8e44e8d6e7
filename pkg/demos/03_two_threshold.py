"""
Two-threshold trading with monthly re-selection
===============================================

Fixed (u, l) first, then the adaptive version that picks (u, l) each
month from the previous six.
"""

from perpetual_arb import backtest, noarb
from perpetual_arb.strategy import StrategySpec
from perpetual_arb.synth import SynthConfig, generate

series, funding = generate(SynthConfig(seed=11, n_hours=24 * 365 * 2, gap_vol=6.0))
tier = noarb.FEE_TIERS["low"]

fixed = backtest.run_backtest(series, funding, StrategySpec.two_threshold(0.7, 0.1), tier)
adaptive = backtest.run_backtest(series, funding, StrategySpec.adaptive_two_threshold(), tier)

print(backtest.summary_table([fixed]))
print(backtest.summary_table([adaptive]))
print(backtest.decomposition_table([fixed, adaptive]))

for c in adaptive.thresholds[:3]:
    print(c)
