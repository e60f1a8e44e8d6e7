import subprocess
import sys

import pytest

from perpetual_arb.cli import main
from perpetual_arb.marketdata import emit_funding, emit_prices
from perpetual_arb.synth import SynthConfig, generate


def run(*args):
    return main(list(args))


def test_bounds_single_tier(capsys):
    assert run("bounds", "--tier", "high") == 0
    assert capsys.readouterr().out.strip() == "-168.5% 190.1%"


def test_bounds_all_tiers(capsys):
    assert run("bounds") == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [l.split()[0] for l in lines] == ["none", "low", "medium", "high"]
    assert lines[1].split()[1:] == ["-42.3%", "64.1%"]


def test_bounds_bad_tier_exit_1():
    assert run("bounds", "--tier", "vip") == 1
    assert run("bounds", "--kappa", "0") == 1


def test_unknown_command_exit_1():
    assert run("frobnicate") == 1


@pytest.fixture(scope="module")
def market(tmp_path_factory):
    d = tmp_path_factory.mktemp("mkt")
    series, schedule = generate(SynthConfig(seed=5, n_hours=24 * 250, asset_id="SYN"))
    emit_prices(series, d / "prices.csv")
    emit_funding(schedule, d / "funding.csv")
    return d


def write_config(d, out="out", extra="", adaptive="false", asset_extra=""):
    cfg = d / f"run_{out}.ini"
    cfg.write_text(f"""[run]
output_dir = {out}
tier = low

[strategy]
kind = two_threshold
adaptive = {adaptive}
u = 0.7
l = 0.1
{extra}
[asset:SYN]
prices = prices.csv
funding = funding.csv
{asset_extra}
""")
    return cfg


def test_backtest_outputs_and_determinism(market):
    cfg_a = write_config(market, "out_a")
    cfg_b = write_config(market, "out_b")
    assert run("backtest", str(cfg_a)) == 0
    assert run("backtest", str(cfg_b)) == 0
    names = ["SYN_report.json", "SYN_returns.csv", "summary.txt", "decomposition.txt", "summary.json"]
    for n in names:
        assert (market / "out_a" / n).read_bytes() == (market / "out_b" / n).read_bytes()


def test_grid_search_and_analyze(market):
    cfg = write_config(market, "out_g", adaptive="true")
    assert run("grid-search", str(cfg)) == 0
    rows = (market / "out_g" / "SYN_thresholds.csv").read_text().splitlines()
    assert rows[0] == "month_start,u,l" and len(rows) > 1
    assert run("analyze", str(cfg)) == 0
    dev = (market / "out_g" / "SYN_deviation.csv").read_text().splitlines()
    assert dev[0] == "timestamp,rho,rho_ma7d"
    assert (market / "out_g" / "correlation.csv").exists()
    assert (market / "out_g" / "regression.txt").exists()


def test_missing_funding_key_exit_1(market, caplog):
    cfg = market / "nofund.ini"
    cfg.write_text("[strategy]\nkind = two_threshold\n\n[asset:BTC]\nprices = prices.csv\n")
    assert run("backtest", str(cfg)) == 1
    assert "BTC" in caplog.text and "funding" in caplog.text


def test_bad_config_values_exit_1(market):
    assert run("backtest", str(market / "nope.ini")) == 1
    cfg = write_config(market, "out_x", extra="restriction = sideways")
    assert run("backtest", str(cfg)) == 1


def test_malformed_data_exit_2(market, tmp_path, caplog):
    bad = tmp_path / "prices.csv"
    bad.write_text("timestamp,futures_price,spot_price\n2020-01-01T00:00:00Z,1,1\n2020-01-01T01:00:00Z,0,1\n")
    (tmp_path / "funding.csv").write_text((market / "funding.csv").read_text())
    cfg = write_config(tmp_path, "out")
    assert run("backtest", str(cfg)) == 2
    assert "line 3" in caplog.text


def test_event_study_without_minutes_exit_2(market):
    assert run("event-study", str(write_config(market, "out_e"))) == 2


def test_synth_command_deterministic(tmp_path):
    args = ["synth", "--seed", "3", "--hours", "48"]
    assert run(*args, "--out-prices", str(tmp_path / "a.csv"), "--out-funding", str(tmp_path / "fa.csv")) == 0
    assert run(*args, "--out-prices", str(tmp_path / "b.csv"), "--out-funding", str(tmp_path / "fb.csv")) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "fa.csv").read_bytes() == (tmp_path / "fb.csv").read_bytes()
    assert run("synth", "--hours", "2", "--out-prices", "x", "--out-funding", "y") == 1


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "perpetual_arb", "bounds", "--tier", "none"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.strip() == "10.9% 10.9%"
