import json
import math

import numpy as np
import pytest

from perpetual_arb.accounting import funding_per_observation, position_returns, summarize
from perpetual_arb.backtest import (
    adjusted_sharpe,
    decompose,
    decomposition_table,
    report_from_positions,
    run_backtest,
    summary_table,
    write_json,
    write_returns_csv,
)
from perpetual_arb.marketdata import DataError, FundingSchedule
from perpetual_arb.noarb import FEE_TIERS, FeeTier, TheoryParams, benchmark_deviation, deviation_bounds
from perpetual_arb.strategy import StrategySpec

from conftest import START, flat_schedule, series_from_rho


def test_adjusted_sharpe_closed_form():
    x = np.array([0.01, -0.01] * 50)
    x = x + 0.001
    expected = 0.001 / np.std(x, ddof=1) * math.sqrt(4380)
    assert adjusted_sharpe(x, 4380) == pytest.approx(expected, rel=1e-12)


def test_adjusted_sharpe_oracle():
    # mu/sigma = 0.1 exactly; sqrt(8760) from 40-digit mpmath
    x = np.array([1.1, -0.9] * 4 + [1.1])
    mu, sd = x.mean(), x.std(ddof=1)
    assert adjusted_sharpe(x, 8760) == pytest.approx(mu / sd * 93.59487165438072, rel=1e-13)


def test_adjusted_sharpe_errors():
    with pytest.raises(ValueError):
        adjusted_sharpe([0.1], 100)
    with pytest.raises(ValueError):
        adjusted_sharpe([0.1, 0.1], 100)
    with pytest.raises(ValueError):
        adjusted_sharpe([0.1, 0.2], 0)


def test_funding_attribution_to_previous_position():
    s = series_from_rho(np.zeros(17))
    sch = FundingSchedule("T", [START, START + 8 * 3600, START + 16 * 3600], [0.5, 0.001, -0.002])
    rates, covered = funding_per_observation(s, sch)
    assert rates[0] == 0 and rates[8] == 0.001 and rates[16] == -0.002
    assert covered.all()
    pos = np.zeros(17, dtype=int)
    pos[7:9] = 1  # open at 07:00, hold through the 08:00 payment
    pos[12:16] = -1
    comp = position_returns(pos, s, sch, 0.0)
    assert comp.funding[8] == 0.001
    assert comp.funding[16] == 0.002  # long futures pays a negative rate -> receives
    assert comp.funding.sum() == pytest.approx(0.003)


def test_missing_funding_while_open():
    s = series_from_rho(np.zeros(17))
    sch = FundingSchedule("T", [START, START + 16 * 3600], [0.0, 0.0])
    pos = np.zeros(17, dtype=int)
    with pytest.raises(DataError):
        position_returns(np.r_[np.ones(10, int), np.zeros(7, int)], s, sch, 0.0)
    position_returns(pos, s, sch, 0.0)  # flat: gap is fine


def test_fees_charge_each_trade():
    s = series_from_rho(np.zeros(6))
    pos = [0, 1, -1, -1, 0, 0]
    comp = position_returns(pos, s, flat_schedule(s), 0.001)
    np.testing.assert_allclose(comp.fee, [0, -0.001, -0.002, 0, -0.001, 0])


def test_price_leg_is_log_basis_change():
    rho = np.array([0.5, 0.2, 0.2])
    s = series_from_rho(rho, spot=[100.0, 110.0, 90.0])
    comp = position_returns([1, 1, 0], s, flat_schedule(s), 0.0)
    assert comp.price[1] == pytest.approx((0.5 - 0.2) / 1095, rel=1e-10)
    assert comp.price[2] == pytest.approx(0.0, abs=1e-15)


def test_summarize_flat_is_undefined():
    m = summarize(np.zeros(10), np.zeros(10, bool))
    assert m.active_pct == 0 and not m.sharpe_defined and m.sharpe == 0


def _report():
    rho = 0.9 * np.sin(np.arange(24 * 60) / 30.0)
    s = series_from_rho(rho)
    sch = flat_schedule(s, 0.0001)
    return run_backtest(s, sch, StrategySpec.two_threshold(0.7, 0.1), FEE_TIERS["low"])


def test_report_identities():
    rep = _report()
    assert rep.overall.sharpe_defined
    assert rep.return_ann / rep.vol_ann == pytest.approx(rep.sharpe, rel=1e-12)
    np.testing.assert_allclose(rep.price + rep.funding + rep.fee, rep.total, rtol=0, atol=1e-15)
    d = decompose(rep)
    assert d.price_total + d.funding_total + d.fee_total == pytest.approx(d.return_ann, rel=1e-12)
    assert rep.forced_close in (True, False)
    assert rep.positions[-1] == 0


def test_report_by_year_and_outputs(tmp_path):
    rep = _report()
    assert list(rep.by_year) == [2020]
    write_json(rep, tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["overall"]["sharpe"] == rep.sharpe
    write_returns_csv(rep, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "timestamp,total,price,funding,fee,active"
    assert len(lines) == len(rep.timestamps) + 1
    table = summary_table([rep])
    assert "Active %" in table and "SR" in table
    assert f"{rep.return_ann:.1f}" in table
    assert f"{decompose(rep).price_total:.1f}" in decomposition_table([rep])


def test_random_maturity_backtest_runs():
    rho = np.r_[np.zeros(10), np.full(10, 0.7), np.full(10, 0.1)]
    s = series_from_rho(rho)
    tier = FEE_TIERS["low"]
    p = TheoryParams()
    spec = StrategySpec.random_maturity(deviation_bounds(p, tier), benchmark_deviation(p))
    rep = run_backtest(s, flat_schedule(s), spec, tier)
    assert rep.positions[10] == 1 and rep.positions[20] == 0
    assert rep.strategy == "random_maturity"


def test_report_from_positions_custom_tier():
    s = series_from_rho(np.zeros(10))
    rep = report_from_positions(s, flat_schedule(s), np.zeros(10, int), FeeTier("zero", 0, 0))
    assert rep.active_pct == 0.0
