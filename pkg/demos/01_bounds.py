"""
No-arbitrage deviation bands
============================

Where should the futures trade relative to spot before a basis trade
pays for its own fees?
"""

import numpy as np

from perpetual_arb import noarb

params = noarb.TheoryParams(r=0.1095, kappa=1095)

# With no fees the band collapses onto the frictionless benchmark.
print(f"benchmark deviation: {100 * noarb.benchmark_deviation(params):.4f}%")

for name, tier in noarb.FEE_TIERS.items():
    b = noarb.deviation_bounds(params, tier)
    print(f"{name:<8} C={tier.round_trip_cost:.6f}  rho_l={100 * b.rho_l:8.2f}%  rho_u={100 * b.rho_u:8.2f}%")

# The bound process from a start off the benchmark runs away exponentially,
# which is why entering outside the band eventually pays.
t = np.linspace(0, 0.005, 6)
print(noarb.bound_process(t, F0=10_050.0, S0=10_000.0, params=params))
