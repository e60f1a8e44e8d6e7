import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from perpetual_arb.funding import (
    LONG,
    SHORT,
    FundingAccrual,
    accrual,
    accrue_continuous,
    funding_cashflow,
    schedule_from_gaps,
)
from perpetual_arb.marketdata import DataError, FundingSchedule, MarketSeries, parse_timestamp
from perpetual_arb.noarb import TheoryParams

from conftest import START, series_from_rho


def const_gap_window(gap, spot=100.0, step=3600, hours=8):
    n = hours * 3600 // step + 1
    ts = START + step * np.arange(n)
    return MarketSeries("C", step, ts, np.full(n, spot + gap), np.full(n, spot))


@pytest.mark.parametrize("gap", [0.0, 1.0, -2.5, 37.125])
def test_constant_gap_accrues_gap_over_8_hours(gap):
    assert accrue_continuous(const_gap_window(gap)) == pytest.approx(gap, rel=1e-12, abs=1e-12)


def test_accrual_payer():
    assert accrual(const_gap_window(1.0)).payer == LONG
    assert accrual(const_gap_window(-1.0)).payer == SHORT
    a = accrual(const_gap_window(0.5))
    assert a.interval == (START, START + 8 * 3600)
    assert isinstance(a, FundingAccrual)


def test_accrual_linear_gap_exact():
    # trapezoid is exact for a linear gap: mean of endpoints times 8 hours times kappa
    n = 9
    ts = START + 3600 * np.arange(n)
    s = MarketSeries("L", 3600, ts, 100 + np.linspace(0, 8, n), np.full(n, 100.0))
    assert accrue_continuous(s) == pytest.approx(4.0, rel=1e-12)


def test_accrual_short_series():
    with pytest.raises(ValueError):
        accrue_continuous(const_gap_window(1.0, hours=0, step=3600))


@given(st.floats(-0.01, 0.01))
def test_cashflows_cancel(rate):
    sch = FundingSchedule("X", [START], [rate])
    assert funding_cashflow(sch, LONG, START) + funding_cashflow(sch, SHORT, START) == 0.0
    assert funding_cashflow(sch, SHORT, START) == rate


def test_cashflow_missing_event():
    sch = FundingSchedule("X", [START], [0.0001])
    with pytest.raises(KeyError):
        funding_cashflow(sch, LONG, START + 8 * 3600)
    with pytest.raises(ValueError):
        funding_cashflow(sch, "flat", START)


def test_schedule_from_constant_gap():
    rho = np.full(48, 0.1095)
    s = series_from_rho(rho)
    sch = schedule_from_gaps(s)
    # boundaries 08:00, 16:00, 00:00 next day, ...
    assert sch.timestamps[0] == START + 8 * 3600
    frac = np.exp(0.1095 / 1095) - 1
    np.testing.assert_allclose(sch.rates, frac, rtol=1e-12)


def test_schedule_window_excludes_boundary_hour():
    rho = np.zeros(17)
    rho[8] = 1.095  # stamped exactly at 08:00, belongs to the 16:00 window
    sch = schedule_from_gaps(series_from_rho(rho))
    assert sch.rate_at(START + 8 * 3600) == 0.0
    assert sch.rate_at(START + 16 * 3600) == pytest.approx((np.exp(0.001) - 1) / 8, rel=1e-12)


def test_schedule_scales_with_kappa():
    s = series_from_rho(np.full(24, 0.5))
    a = schedule_from_gaps(s, TheoryParams(kappa=1095))
    b = schedule_from_gaps(s, TheoryParams(kappa=2190))
    np.testing.assert_allclose(b.rates, 2 * a.rates, rtol=1e-14)


def test_schedule_needs_data():
    with pytest.raises(DataError):
        schedule_from_gaps(series_from_rho(np.zeros(5)))


def test_schedule_rejects_misaligned_events():
    with pytest.raises(ValueError):
        FundingSchedule("X", [parse_timestamp("2020-01-01T04:00:00Z")], [0.0])
