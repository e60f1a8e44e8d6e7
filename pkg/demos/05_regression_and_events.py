"""
Deviation regressions and the funding-payment event study
=========================================================
"""

import numpy as np

from perpetual_arb import analysis
from perpetual_arb.marketdata import FundingSchedule, MarketSeries
from perpetual_arb.noarb import FEE_TIERS
from perpetual_arb.synth import SynthConfig, generate

# Daily deviation on trailing 4-month spot return.
series, _ = generate(SynthConfig(seed=4, n_hours=24 * 365, spot_drift=0.3))
ret = analysis.past_return_regressor(series, 4)
daily = analysis.daily_sample(series)
keep = np.isin(daily.timestamps, ret.timestamps)
res = analysis.ols_hac(daily.rho[keep], {"Ret": ret.values})
print(analysis.regression_table({"SYN": res}))

# Minute data where the futures cheapens by 3 bp over the 4 hours before each payment.
rng = np.random.default_rng(0)
start = 1577836800
events = start + 28800 * np.arange(1, 61)
ts = np.arange(start, int(events[-1]) + 241 * 60, 60)
steps = 1e-5 * rng.standard_normal(ts.size)
for e in events:
    i = (int(e) - start) // 60
    steps[i - 239:i + 1] += 3e-4 / 240
spot = np.full(ts.size, 100.0)
minute = MarketSeries("SYN", 60, ts, spot * np.exp(-np.cumsum(steps)), spot)
schedule = FundingSchedule("SYN", events, np.full(events.size, 1e-4))

study = analysis.event_study(minute, schedule)
print("cumulative at payment: %.2f bp" % (1e4 * study.mean_cum_returns_positive[240]))
cap = analysis.funding_capture_backtest(minute, schedule, FEE_TIERS["none"])
print("capture: %.2f bp/event, %.1f%%/yr" % (1e4 * cap.mean_return, 100 * cap.annualized_return))
