import numpy as np
import pytest

from perpetual_arb.marketdata import EIGHT_HOURS, HOUR, FundingSchedule, MarketSeries

START = 1577836800  # 2020-01-01T00:00:00Z


def series_from_rho(rho, spot=10000.0, start=START, asset="T", cadence=HOUR):
    """Hourly series whose deviation is exactly ``rho`` (annualized fraction)."""
    rho = np.asarray(rho, dtype=float)
    spot = np.broadcast_to(np.asarray(spot, dtype=float), rho.shape)
    ts = start + cadence * np.arange(rho.size)
    return MarketSeries(asset, cadence, ts, spot * np.exp(rho / 1095.0), spot)


def flat_schedule(series, rate=0.0):
    """One event at every 8-hour boundary inside the series span."""
    ts = series.timestamps
    first = -(-int(ts[0]) // EIGHT_HOURS) * EIGHT_HOURS
    ev = np.arange(first, int(ts[-1]) + 1, EIGHT_HOURS)
    rates = np.broadcast_to(np.asarray(rate, dtype=float), ev.shape)
    return FundingSchedule(series.asset_id, ev, rates)


@pytest.fixture
def write_csv(tmp_path):
    def _write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return p

    return _write


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
