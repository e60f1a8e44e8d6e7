"""Command-line front end.

Exit codes: 0 success, 1 invalid arguments or configuration, 2 bad input data.

Configuration is an INI file::

    [run]
    output_dir = out
    tier = high

    [theory]
    r = 0.1095
    kappa = 1095

    [strategy]
    kind = two_threshold        # or random_maturity
    adaptive = true             # monthly grid search for (u, l)
    u = 0.7
    l = 0.1
    restriction = unrestricted  # or long_spot_only

    [asset:BTC]
    prices = btc_hourly.csv
    funding = btc_funding.csv
    minute_prices = btc_minute.csv   # optional, event study only

    [analysis]
    exogenous = fear_greed.csv       # optional
    exogenous_name = fng
    lookback_months = 4
    hac_lag = 5                      # optional

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, backtest, noarb
from .marketdata import (
    DAY,
    HOUR,
    MINUTE,
    DataError,
    ExogenousSeries,
    align,
    emit_funding,
    emit_prices,
    format_timestamp,
    ingest_exogenous,
    ingest_funding,
    ingest_prices,
    moving_average,
)
from .strategy import (
    LONG_SPOT_ONLY,
    RANDOM_MATURITY,
    TWO_THRESHOLD,
    UNRESTRICTED,
    GridSearchConfig,
    StrategySpec,
    rolling_thresholds,
)
from .synth import SynthConfig, generate

log = logging.getLogger("perpetual_arb")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AssetConfig:
    symbol: str
    prices: Path
    funding: Path
    minute_prices: Path | None = None


@dataclass(frozen=True)
class RunConfig:
    assets: list[AssetConfig]
    tier: noarb.FeeTier
    strategy: StrategySpec
    theory: noarb.TheoryParams
    output_dir: Path
    workers: int = 1
    exogenous: Path | None = None
    exogenous_name: str = "fng"
    lookback_months: int = 4
    hac_lag: int | None = None
    ma_window_days: int = 7


def _get(section, key, conv, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"[{section.name}] missing required key '{key}'")
        return default
    raw = section[key]
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"[{section.name}] invalid value for '{key}': {raw!r}") from None


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    base = path.parent

    def resolve(p: str) -> Path:
        q = Path(p.strip())
        return q if q.is_absolute() else base / q

    run = cp["run"] if cp.has_section("run") else cp[cp.default_section]
    theory_sec = cp["theory"] if cp.has_section("theory") else cp[cp.default_section]
    try:
        theory = noarb.TheoryParams(_get(theory_sec, "r", float, 0.1095), _get(theory_sec, "kappa", float, 1095.0))
    except ValueError as exc:
        raise ConfigError(f"[theory] {exc}") from None
    tier_name = _get(run, "tier", str, "high")
    try:
        tier = noarb.fee_tier(tier_name.strip())
    except ValueError as exc:
        raise ConfigError(f"[run] tier: {exc}") from None
    output_dir = resolve(_get(run, "output_dir", str, "out"))
    workers = _get(run, "workers", int, 1)

    if not cp.has_section("strategy"):
        raise ConfigError("missing [strategy] section")
    st = cp["strategy"]
    kind = _get(st, "kind", str, required=True).strip()
    restriction = _get(st, "restriction", str, UNRESTRICTED).strip()
    if restriction not in (UNRESTRICTED, LONG_SPOT_ONLY):
        raise ConfigError(f"[strategy] restriction must be '{UNRESTRICTED}' or '{LONG_SPOT_ONLY}'")
    try:
        if kind == RANDOM_MATURITY:
            bounds = noarb.deviation_bounds(theory, tier)
            target = _get(st, "close_target", float, noarb.benchmark_deviation(theory))
            spec = StrategySpec.random_maturity(bounds, target, restriction)
        elif kind == TWO_THRESHOLD:
            if _get(st, "adaptive", _bool, True):
                grid = GridSearchConfig(lookback_months=_get(st, "lookback_months", int, 6))
                spec = StrategySpec.adaptive_two_threshold(restriction, grid)
            else:
                spec = StrategySpec.two_threshold(_get(st, "u", float, required=True),
                                                  _get(st, "l", float, required=True), restriction)
        else:
            raise ConfigError(f"[strategy] kind must be '{RANDOM_MATURITY}' or '{TWO_THRESHOLD}', got {kind!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[strategy] {exc}") from None

    assets = []
    for name in cp.sections():
        if not name.startswith("asset:"):
            continue
        sym = name.split(":", 1)[1].strip()
        sec = cp[name]
        if "prices" not in sec:
            raise ConfigError(f"asset {sym}: missing 'prices'")
        if "funding" not in sec:
            raise ConfigError(f"asset {sym}: missing funding CSV ('funding' key)")
        prices, fund = resolve(sec["prices"]), resolve(sec["funding"])
        minute = resolve(sec["minute_prices"]) if "minute_prices" in sec else None
        for label, p in (("prices", prices), ("funding", fund), ("minute_prices", minute)):
            if p is not None and not p.is_file():
                raise ConfigError(f"asset {sym}: {label} file not found: {p}")
        assets.append(AssetConfig(sym, prices, fund, minute))
    if not assets:
        raise ConfigError("no [asset:<symbol>] sections")

    an = cp["analysis"] if cp.has_section("analysis") else cp[cp.default_section]
    exo = _get(an, "exogenous", resolve)
    if exo is not None and not exo.is_file():
        raise ConfigError(f"[analysis] exogenous file not found: {exo}")
    return RunConfig(
        assets, tier, spec, theory, output_dir, workers, exo,
        _get(an, "exogenous_name", str, "fng"), _get(an, "lookback_months", int, 4),
        _get(an, "hac_lag", int), _get(an, "ma_window_days", int, 7),
    )


def _prepare_output(cfg: RunConfig) -> Path:
    try:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output_dir not writable: {exc}") from None
    return cfg.output_dir


def _load_asset(a: AssetConfig):
    return ingest_prices(a.prices, a.symbol, HOUR), ingest_funding(a.funding, a.symbol)


def _map(cfg: RunConfig, fn, items):
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_bounds(args) -> int:
    try:
        params = noarb.TheoryParams(args.r, args.kappa)
        names = [args.tier] if args.tier else list(noarb.FEE_TIERS)
        tiers = [noarb.fee_tier(n) for n in names]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for tier in tiers:
        b = noarb.deviation_bounds(params, tier)
        line = f"{100 * b.rho_l:.1f}% {100 * b.rho_u:.1f}%"
        print(line if args.tier else f"{tier.name:<8}{line}")
    return 0


def cmd_synth(args) -> int:
    try:
        cfg = SynthConfig(seed=args.seed, n_hours=args.hours, spot_vol=args.spot_vol, spot_drift=args.spot_drift,
                          gap_mean=args.gap_mean, gap_reversion=args.gap_reversion, gap_vol=args.gap_vol,
                          gap_bound=args.gap_bound, initial_rho=args.initial_rho, asset_id=args.asset)
        params = noarb.TheoryParams(args.r, args.kappa)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    series, schedule = generate(cfg, params)
    emit_prices(series, args.out_prices)
    emit_funding(schedule, args.out_funding)
    log.info("wrote %d hourly observations and %d funding events", len(series), len(schedule))
    return 0


def cmd_backtest(args) -> int:
    cfg = load_config(args.config)
    out = _prepare_output(cfg)

    def run(a: AssetConfig):
        series, schedule = _load_asset(a)
        return backtest.run_backtest(series, schedule, cfg.strategy, cfg.tier)

    reports = _map(cfg, run, cfg.assets)
    for r in reports:
        backtest.write_json(r, out / f"{r.asset_id}_report.json")
        backtest.write_returns_csv(r, out / f"{r.asset_id}_returns.csv")
    summary = backtest.summary_table(reports)
    (out / "summary.txt").write_text(summary)
    (out / "decomposition.txt").write_text(backtest.decomposition_table(reports))
    with open(out / "summary.json", "w") as fh:
        json.dump({r.asset_id: r.to_dict() for r in reports}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    sys.stdout.write(summary)
    return 0


def cmd_grid_search(args) -> int:
    cfg = load_config(args.config)
    out = _prepare_output(cfg)
    grid = cfg.strategy.grid if cfg.strategy.kind == TWO_THRESHOLD else GridSearchConfig()

    def run(a: AssetConfig):
        series, schedule = _load_asset(a)
        choices, _, _ = rolling_thresholds(series, schedule, cfg.tier, cfg.strategy.restriction, grid)
        return a.symbol, choices

    for sym, choices in _map(cfg, run, cfg.assets):
        with open(out / f"{sym}_thresholds.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["month_start", "u", "l"])
            for c in choices:
                w.writerow([format_timestamp(c.start), f"{c.u:.2f}", f"{c.l:.2f}"])
        print(f"{sym}: {len(choices)} monthly selections")
    return 0


def _write_event_study(res: analysis.EventStudyResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["minute_offset", "mean_cum_return_pos", "mean_cum_return_neg"])
        for k, p, n in zip(res.offsets, res.mean_cum_returns_positive, res.mean_cum_returns_negative):
            w.writerow([int(k), repr(float(p)), repr(float(n))])


def _event_study_asset(a: AssetConfig, cfg: RunConfig, out: Path) -> None:
    minute = ingest_prices(a.minute_prices, a.symbol, MINUTE)
    schedule = ingest_funding(a.funding, a.symbol)
    res = analysis.event_study(minute, schedule)
    _write_event_study(res, out / f"{a.symbol}_event_study.csv")
    cap = analysis.funding_capture_backtest(minute, schedule, cfg.tier)
    with open(out / f"{a.symbol}_funding_capture.json", "w") as fh:
        json.dump({
            "asset": a.symbol, "tier": cfg.tier.name, "events": cap.n_events, "skipped": cap.skipped,
            "mean_return_bps": 1e4 * cap.mean_return, "annualized_return_pct": 100 * cap.annualized_return,
            "event_counts": {"positive": res.event_counts[0], "negative": res.event_counts[1]},
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_event_study(args) -> int:
    cfg = load_config(args.config)
    out = _prepare_output(cfg)
    done = 0
    for a in cfg.assets:
        if a.minute_prices is None:
            log.warning("%s: no minute_prices configured; skipping event study", a.symbol)
            continue
        _event_study_asset(a, cfg, out)
        done += 1
    if not done:
        raise DataError("no asset has minute_prices configured")
    return 0


def _daily_columns(series, schedule) -> list[ExogenousSeries]:
    daily = analysis.daily_sample(series)
    sym = series.asset_id
    cols = [ExogenousSeries(f"{sym}:rho", daily.timestamps, daily.rho)]
    if len(daily) > 1:
        ret = np.diff(np.log(daily.spot))
        cols.append(ExogenousSeries(f"{sym}:ret", daily.timestamps[1:], ret))
    cols.append(ExogenousSeries(f"{sym}:funding", schedule.timestamps[schedule.timestamps % DAY == 0],
                                schedule.rates[schedule.timestamps % DAY == 0]))
    return cols


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    out = _prepare_output(cfg)
    loaded = [_load_asset(a) for a in cfg.assets]
    window = cfg.ma_window_days * DAY

    for series, _ in loaded:
        rho = series.rho
        ma = moving_average(series.timestamps, rho, window)
        with open(out / f"{series.asset_id}_deviation.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["timestamp", "rho", f"rho_ma{cfg.ma_window_days}d"])
            for t, r, m in zip(series.timestamps, rho, ma):
                w.writerow([format_timestamp(t), repr(float(r)), repr(float(m))])

    exo = ingest_exogenous(cfg.exogenous, cfg.exogenous_name) if cfg.exogenous else None

    cols = [c for s, f in loaded for c in _daily_columns(s, f)]
    if exo is not None:
        cols.append(exo)
    try:
        table = align(cols)
        names, corr = analysis.correlation_matrix(table)
        with open(out / "correlation.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([""] + names)
            for name, row in zip(names, corr):
                w.writerow([name] + [f"{v:.6f}" for v in row])
    except (DataError, ValueError) as exc:
        log.warning("correlation matrix skipped: %s", exc)

    results = {}
    for series, _ in loaded:
        try:
            ret = analysis.past_return_regressor(series, cfg.lookback_months)
            daily = analysis.daily_sample(series)
            parts = [ExogenousSeries("rho", daily.timestamps, daily.rho), ExogenousSeries("Ret", ret.timestamps,
                                                                                          ret.values)]
            if exo is not None:
                parts.append(ExogenousSeries("FnG", exo.timestamps, exo.values))
            t = align(parts)
            X = {k: t.column(k) for k in t.columns if k != "rho"}
            results[series.asset_id] = analysis.ols_hac(t.column("rho"), X, cfg.hac_lag)
        except (DataError, ValueError, np.linalg.LinAlgError) as exc:
            log.warning("%s: regression skipped: %s", series.asset_id, exc)
    if results:
        (out / "regression.txt").write_text(analysis.regression_table(results))
        with open(out / "regression.json", "w") as fh:
            json.dump({k: v.as_dict() for k, v in results.items()}, fh, indent=2, sort_keys=True)
            fh.write("\n")

    for a in cfg.assets:
        if a.minute_prices is None:
            continue
        try:
            _event_study_asset(a, cfg, out)
        except (DataError, ValueError) as exc:
            log.warning("%s: event study skipped: %s", a.symbol, exc)
    return 0


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="perpetual-arb", description="Perpetual futures no-arbitrage toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="print no-arbitrage deviation bounds per fee tier")
    b.add_argument("--tier", choices=list(noarb.FEE_TIERS), help="one tier (default: all)")
    b.add_argument("--r", type=float, default=0.1095, help="annual risk-free rate (default 0.1095)")
    b.add_argument("--kappa", type=float, default=1095.0, help="funding scale per year (default 1095)")
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("synth", help="write synthetic price and funding CSVs")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--hours", type=int, default=24 * 365)
    s.add_argument("--asset", default="SYN")
    s.add_argument("--spot-vol", type=float, default=0.6)
    s.add_argument("--spot-drift", type=float, default=0.0)
    s.add_argument("--gap-mean", type=float, default=0.1095)
    s.add_argument("--gap-reversion", type=float, default=50.0)
    s.add_argument("--gap-vol", type=float, default=3.0)
    s.add_argument("--gap-bound", type=float, default=3.0)
    s.add_argument("--initial-rho", type=float, default=None)
    s.add_argument("--r", type=float, default=0.1095)
    s.add_argument("--kappa", type=float, default=1095.0)
    s.add_argument("--out-prices", required=True)
    s.add_argument("--out-funding", required=True)
    s.set_defaults(func=cmd_synth)

    for name, fn, text in (
        ("backtest", cmd_backtest, "run the configured strategy on every asset"),
        ("analyze", cmd_analyze, "deviation, correlation, regression and event-study outputs"),
        ("event-study", cmd_event_study, "funding-payment event study on minute data"),
        ("grid-search", cmd_grid_search, "monthly two-threshold selections"),
    ):
        c = sub.add_parser(name, help=text)
        c.add_argument("config", help="INI configuration file")
        c.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return 1
    except DataError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
