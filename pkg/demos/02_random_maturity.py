"""
Random-maturity arbitrage on simulated markets
==============================================

Enter short futures / long spot far above the benchmark and watch every
path turn a positive discounted payoff at some point.
"""

import numpy as np

from perpetual_arb import noarb
from perpetual_arb.synth import SynthConfig, rma_payoff_oracle

params = noarb.TheoryParams()
band = noarb.deviation_bounds(params, noarb.FEE_TIERS["none"])

cfg = SynthConfig(seed=1, n_hours=24 * 90, initial_rho=1.0)
res = rma_payoff_oracle(cfg, n_paths=200, entry_rule=band, params=params)
print(f"{res.fraction_positive:.0%} of paths positive, median first hit "
      f"{np.nanmedian(res.first_positive_hours):.0f}h")

# Net of fees, an entry just outside the high-fee band needs about
# 1/kappa years (8 hours) of funding before it breaks even.
tier = noarb.FEE_TIERS["high"]
hi = noarb.deviation_bounds(params, tier)
still = SynthConfig(n_hours=48, spot_vol=0, gap_vol=0, initial_rho=hi.rho_u + 0.01, gap_mean=hi.rho_u + 0.01)
res = rma_payoff_oracle(still, 1, hi, noarb.TheoryParams(r=0), round_trip_cost=tier.round_trip_cost)
print("break-even after", res.first_positive_hours[0], "hours")
