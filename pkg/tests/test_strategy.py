from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perpetual_arb.marketdata import parse_timestamp
from perpetual_arb.noarb import FEE_TIERS, LONG_FUTURES_SHORT_SPOT, SHORT_FUTURES_LONG_SPOT, DeviationBounds, FeeTier
from perpetual_arb.strategy import (
    CLOSE,
    HOLD,
    LONG_SPOT_ONLY,
    OPEN_LONG_FUT,
    OPEN_SHORT_FUT,
    GridSearchConfig,
    PositionState,
    StrategySpec,
    rma_positions,
    rma_signal,
    rolling_thresholds,
    select_thresholds,
    two_threshold_positions,
    two_threshold_replay,
    two_threshold_signal,
)

from conftest import flat_schedule, series_from_rho

FLAT = PositionState()
SHORT_F = PositionState(SHORT_FUTURES_LONG_SPOT, 0, 101.0, 100.0)
LONG_F = PositionState(LONG_FUTURES_SHORT_SPOT, 0, 99.0, 100.0)


def test_grid_has_210_pairs():
    c = GridSearchConfig().candidates()
    assert len(c) == 210
    assert all(u > l for u, l in c)
    assert c[0] == (0.1, 0.0) and c[-1] == (2.0, 1.9)


@pytest.mark.parametrize("rho,state,expected", [
    (0.8, FLAT, OPEN_SHORT_FUT),
    (0.7, FLAT, HOLD),            # strict inequality at u
    (-0.8, FLAT, OPEN_LONG_FUT),
    (0.05, FLAT, HOLD),
    (0.05, SHORT_F, CLOSE),
    (0.1, SHORT_F, HOLD),         # strict inequality at l
    (-0.05, LONG_F, CLOSE),
    (0.4, SHORT_F, HOLD),
    (-0.8, SHORT_F, CLOSE),       # flip: close, caller re-opens
    (0.8, LONG_F, CLOSE),
])
def test_two_threshold_rule_table(rho, state, expected):
    assert two_threshold_signal(rho, state, 0.7, 0.1) == expected


def test_long_spot_only_blocks_long_futures():
    assert two_threshold_signal(-0.8, FLAT, 0.7, 0.1, LONG_SPOT_ONLY) == HOLD
    assert two_threshold_signal(-0.8, SHORT_F, 0.7, 0.1, LONG_SPOT_ONLY) == HOLD


def test_rma_signal():
    b = DeviationBounds(-0.4, 0.6)
    assert rma_signal(0.7, FLAT, b, 0.11) == OPEN_SHORT_FUT
    assert rma_signal(-0.5, FLAT, b, 0.11) == OPEN_LONG_FUT
    assert rma_signal(-0.5, FLAT, b, 0.11, LONG_SPOT_ONLY) == HOLD
    assert rma_signal(0.2, SHORT_F, b, 0.11) == HOLD
    assert rma_signal(0.11, SHORT_F, b, 0.11) == CLOSE
    assert rma_signal(0.0, LONG_F, b, 0.11) == HOLD
    assert rma_signal(0.2, LONG_F, b, 0.11) == CLOSE


def test_replay_flip_and_forced_close():
    rho = [0.0, 0.8, 0.3, -0.9, -0.2, -0.05, 0.9, 0.9]
    rp = two_threshold_replay(series_from_rho(rho), 0.7, 0.1)
    assert list(rp.positions) == [0, 1, 1, -1, -1, 0, 1, 0]
    assert rp.forced_close
    acts = [a for _, a in rp.actions]
    assert acts == [OPEN_SHORT_FUT, CLOSE, OPEN_LONG_FUT, CLOSE, OPEN_SHORT_FUT, CLOSE]


def test_rma_positions():
    b = DeviationBounds(-0.4, 0.6)
    rp = rma_positions(series_from_rho([0.0, 0.7, 0.3, 0.1, -0.5, 0.0, 0.2, 0.0]), b, 0.11)
    assert list(rp.positions) == [0, 1, 1, 0, -1, -1, 0, 0]
    assert not rp.forced_close


def test_position_state_validation():
    with pytest.raises(ValueError):
        PositionState(SHORT_FUTURES_LONG_SPOT)
    with pytest.raises(ValueError):
        PositionState("flat", 0, 1.0, 1.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        StrategySpec.two_threshold(0.1, 0.1)
    with pytest.raises(ValueError):
        StrategySpec("momentum")
    with pytest.raises(ValueError):
        StrategySpec.two_threshold(0.7, 0.1, restriction="short_only")


levels = st.sampled_from([round(0.1 * k, 1) for k in range(21)])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-2.5, 2.5), min_size=1, max_size=60), levels, levels, st.booleans())
def test_vectorized_matches_replay(rho, a, b, spot_only):
    u, l = max(a, b), min(a, b)
    if u == l:
        u = round(u + 0.1, 1)
    r = "long_spot_only" if spot_only else "unrestricted"
    s = series_from_rho(rho)
    np.testing.assert_array_equal(two_threshold_positions(s.rho, u, l, r), two_threshold_replay(s, u, l, r).positions)


def test_vectorized_with_nan_thresholds():
    rho = np.array([0.9, 0.9, 0.9, 0.9, 0.05])
    u = np.array([np.nan, 0.7, 0.7, np.nan, 0.7])
    l = np.array([np.nan, 0.1, 0.1, np.nan, 0.1])
    s = series_from_rho(rho)
    np.testing.assert_array_equal(two_threshold_positions(s.rho, u, l), [0, 1, 1, 0, 0])
    np.testing.assert_array_equal(two_threshold_replay(s, u, l).positions, [0, 1, 1, 0, 0])


# -- selection -------------------------------------------------------------


def spike_fixture():
    """Deviation spikes to 0.62 and 0.75; only (0.7, 0.1) trades profitably."""
    pad = [0.0] * 8
    rho = pad + [0.62, 0.05, 0.0] + pad + [0.75, 0.15, 0.05, 0.15]
    return series_from_rho(rho)


def test_selection_deterministic_under_order_and_executor():
    s = spike_fixture()
    sch = flat_schedule(s)
    tier = FeeTier("c", 0.65 / 2190 / 2, 0.65 / 2190 / 2)
    cfg = GridSearchConfig()
    base = select_thresholds(s, sch, cfg, tier)
    assert base == (0.7, 0.1)
    rng = np.random.default_rng(7)
    cands = cfg.candidates()
    for _ in range(3):
        perm = [cands[i] for i in rng.permutation(len(cands))]
        assert select_thresholds(s, sch, cfg, tier, candidates=perm) == base
    with ThreadPoolExecutor(4) as ex:
        assert select_thresholds(s, sch, cfg, tier, executor=ex) == base


def test_selection_tie_goes_to_smallest_pair():
    # nothing ever trades: every candidate scores -inf
    s = series_from_rho(np.zeros(30))
    got = select_thresholds(s, flat_schedule(s), GridSearchConfig(), FEE_TIERS["none"])
    assert got == (0.1, 0.0)


def test_rolling_thresholds_need_full_lookback():
    start = parse_timestamp("2020-01-01T00:00:00Z")
    end = parse_timestamp("2020-09-01T00:00:00Z")
    n = (end - start) // 3600
    s = series_from_rho(0.3 * np.sin(np.arange(n) / 50.0), start=start)
    choices, u, _ = rolling_thresholds(s, flat_schedule(s), FEE_TIERS["none"])
    # Jan-Jun have no six-month history; Jul and Aug are selected
    assert [c.start for c in choices] == [parse_timestamp("2020-07-01T00:00:00Z"),
                                          parse_timestamp("2020-08-01T00:00:00Z")]
    july = (parse_timestamp("2020-07-01T00:00:00Z") - start) // 3600
    assert np.all(np.isnan(u[:july])) and not np.any(np.isnan(u[july:]))
