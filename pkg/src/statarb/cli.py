"""Command-line interface: ``statarb {simulate,find,backtest,roll}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import backtest as bt
from .ccp import FinderConfig, InsufficientWarmupError, StatArb, search
from .market_data import (
    PriceDataError,
    SyntheticConfig,
    generate_synthetic,
    load_prices,
    load_spreads,
    save_prices,
)

log = logging.getLogger("statarb")

DEFAULT_LEVERAGE = {"fixed": 50.0, "moving": 100.0}
DEFAULT_TMAX = {"fixed": 63, "moving": 125}


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"error: {message}\n")
        sys.exit(2)


def _integer(text):
    """Integer flag that also accepts decimal literals such as ``7.0``."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if not value.is_integer():
        raise argparse.ArgumentTypeError(f"must be an integer, got {text!r}")
    return int(value)


def _positive_int(text):
    value = _integer(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text!r}")
    return value


def _add_finder_flags(p):
    p.add_argument("--band", choices=("fixed", "moving"), default="fixed")
    p.add_argument("--leverage", type=float, default=None,
                   help="leverage limit in scaled units (default 50 fixed, 100 moving)")
    p.add_argument("--memory", type=_positive_int, default=21)
    p.add_argument("--inits", type=_positive_int, default=10)
    p.add_argument("--max-iter", type=_positive_int, default=50)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--seed", type=_integer, default=0)


def _add_backtest_flags(p):
    p.add_argument("--tmax", type=_integer, default=None, help="default 63 fixed, 125 moving")
    p.add_argument("--texit", type=_positive_int, default=21)
    p.add_argument("--nu", type=float, default=0.5)
    p.add_argument("--shorting-rate", type=float, default=0.005)
    p.add_argument("--spread", type=float, default=0.001,
                   help="constant full bid-ask spread as a fraction of price")
    p.add_argument("--spreads", default=None, help="CSV of full bid-ask spreads in USD per share")
    p.add_argument("--nav-floor", type=float, default=0.5)
    p.add_argument("--days-per-year", type=_positive_int, default=250)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="statarb", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a synthetic cointegrated price panel")
    p.add_argument("--config")
    p.add_argument("--assets", type=_positive_int, default=10)
    p.add_argument("--days", type=_positive_int, default=750)
    p.add_argument("--trends", type=_positive_int, default=2)
    p.add_argument("--spread-vol", type=float, default=0.02)
    p.add_argument("--trend-vol", type=float, default=0.01)
    p.add_argument("--rate", type=float, default=0.1)
    p.add_argument("--base-price", type=float, default=50.0)
    p.add_argument("--seed", type=_integer, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("find", help="search a training window for stat-arbs")
    p.add_argument("--config")
    p.add_argument("--prices", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--train-start")
    p.add_argument("--train-end")
    _add_finder_flags(p)

    p = sub.add_parser("backtest", help="simulate stat-arbs from a JSON file")
    p.add_argument("--config")
    p.add_argument("--prices", required=True)
    p.add_argument("--statarbs", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--start", help="first trading date (default: day after train_end)")
    p.add_argument("--seed", type=_integer, default=0, help="accepted for symmetry; backtests draw no random numbers")
    _add_backtest_flags(p)

    p = sub.add_parser("roll", help="rolling re-search and backtest protocol")
    p.add_argument("--config")
    p.add_argument("--prices", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--stride", type=_positive_int, default=21)
    p.add_argument("--train-window", type=_positive_int, default=500)
    p.add_argument("--first-search", help="first search date (default: earliest possible)")
    p.add_argument("--last-search", help="last search date (default: latest with a full evaluation window)")
    _add_finder_flags(p)
    _add_backtest_flags(p)
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults taken from ``--config``; explicit flags win."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {args.config}: {exc}")
    if not isinstance(cfg, dict):
        parser.error("config file must hold a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    dests = {a.dest for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest not in dests or dest in ("help", "config"):
            parser.error(f"unknown config key {key!r} for {args.command}")
        action = next(a for a in sub._actions if a.dest == dest)
        if action.type is not None and value is not None:
            try:
                value = action.type(str(value))
            except (argparse.ArgumentTypeError, ValueError) as exc:
                parser.error(f"config key {key!r}: {exc}")
        defaults[dest] = value
        action.required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _finder_config(args) -> FinderConfig:
    leverage = args.leverage if args.leverage is not None else DEFAULT_LEVERAGE[args.band]
    try:
        return FinderConfig(
            leverage_limit=leverage, band_kind=args.band, memory=args.memory,
            max_iterations=args.max_iter, objective_tolerance=args.tol,
            cleanup_threshold=args.eta, n_initializations=args.inits, seed=args.seed,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _backtest_config(args, band_kind: str) -> bt.BacktestConfig:
    spreads = load_spreads(args.spreads) if args.spreads else None
    tmax = args.tmax if args.tmax is not None else DEFAULT_TMAX[band_kind]
    try:
        return bt.BacktestConfig(
            nu=args.nu, t_max=tmax, t_exit=args.texit, shorting_rate=args.shorting_rate,
            nav_floor_fraction=args.nav_floor, relative_spread=args.spread, spreads=spreads,
            trading_days_per_year=args.days_per_year,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def _percentile(values, q):
    return float(np.percentile(values, q)) if len(values) else None


def aggregate(metrics: list[bt.Metrics]) -> dict:
    """Fraction profitable plus mean/median/quartiles of each metric.

    Non-finite Sharpe ratios (zero risk) are left out of the Sharpe row.
    """
    table = {}
    for name, attr in (("annualized_return", "mean_return"), ("annualized_risk", "risk"),
                       ("sharpe", "sharpe"), ("max_drawdown", "max_drawdown")):
        vals = [getattr(m, attr) for m in metrics]
        vals = [v for v in vals if np.isfinite(v)]
        table[name] = {
            "average": float(np.mean(vals)) if vals else None,
            "median": _percentile(vals, 50),
            "p25": _percentile(vals, 25),
            "p75": _percentile(vals, 75),
            "count": len(vals),
        }
    return {
        "count": len(metrics),
        "fraction_profitable": (sum(m.profit > 0 for m in metrics) / len(metrics)) if metrics else None,
        "fraction_terminated_early": (sum(m.terminated_early for m in metrics) / len(metrics)) if metrics else None,
        "table": table,
    }


def cmd_simulate(args) -> int:
    try:
        cfg = SyntheticConfig(
            n_assets=args.assets, n_days=args.days, n_common_trends=args.trends,
            spread_volatility=args.spread_vol, trend_volatility=args.trend_vol,
            mean_reversion_rate=args.rate, base_price=args.base_price, seed=args.seed,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    save_prices(generate_synthetic(cfg), args.out)
    return 0


def cmd_find(args) -> int:
    pm = load_prices(args.prices)
    cfg = _finder_config(args)
    report = search(pm, cfg, args.train_start, args.train_end)
    for w in report.warnings:
        log.warning(w)
    _dump_json([sa.to_dict() for sa in report.statarbs], args.out)
    return 0


def _run_one(sa, pm, cfg, start):
    try:
        res = bt.run(sa, pm, cfg, start)
    except bt.BustError as exc:
        log.warning("stat-arb %s went bust: %s", ",".join(sa.assets), exc)
        res = exc.result
        res.terminated_early = True
        res.termination_date = res.dates[-1]
    return res, bt.compute_metrics(res, cfg.trading_days_per_year)


def _next_date(pm, date):
    row = pm.index_of(date)
    if row + 1 >= pm.n_days:
        raise CliError(f"no trading days after {date}")
    return pm.dates[row + 1]


def cmd_backtest(args) -> int:
    pm = load_prices(args.prices)
    records = json.loads(Path(args.statarbs).read_text())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    all_metrics = []
    for i, rec in enumerate(records):
        sa = StatArb.from_dict(rec)
        cfg = _backtest_config(args, sa.band.kind)
        start = args.start or _next_date(pm, sa.train_end)
        res, m = _run_one(sa, pm, cfg, start)
        bt.write_report(res, out / f"statarb_{i:03d}.csv")
        bt.write_metrics(m, out / f"statarb_{i:03d}_metrics.json")
        all_metrics.append(m)
    _dump_json(aggregate(all_metrics), out / "summary.json")
    return 0


def search_rows(pm, args, cfg: FinderConfig, horizon: int) -> list[int]:
    """Panel rows that end each training window in the rolling protocol."""
    first = args.train_window - 1 + cfg.warmup_rows
    if args.first_search:
        row = pm.index_of(args.first_search)
        if row < args.train_window - 1:
            raise CliError(f"first search date {args.first_search} leaves fewer than "
                           f"{args.train_window} training days")
        first = row
    last = pm.n_days - 1 - horizon
    if args.last_search:
        last = min(last, pm.index_of(args.last_search))
    if first > last:
        raise CliError(
            f"panel of {pm.n_days} days cannot hold a {args.train_window}-day training window "
            f"plus a {horizon}-day evaluation window"
        )
    return list(range(first, last + 1, args.stride))


def active_counts(pm, intervals) -> list[tuple[str, int]]:
    """Number of stat-arbs whose ``[start, end]`` trading interval covers each date."""
    pos = {d: i for i, d in enumerate(pm.dates)}
    delta = np.zeros(pm.n_days + 1, dtype=int)
    for a, b in intervals:
        delta[pos[a]] += 1
        delta[pos[b] + 1] -= 1
    counts = np.cumsum(delta[:-1])
    return list(zip(pm.dates, (int(c) for c in counts)))


def cmd_roll(args) -> int:
    pm = load_prices(args.prices)
    fcfg = _finder_config(args)
    bcfg = _backtest_config(args, fcfg.band_kind)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seen: set[frozenset] = set()
    records, metrics, intervals = [], [], []
    for number, row in enumerate(search_rows(pm, args, fcfg, bcfg.horizon)):
        lo = row - args.train_window + 1
        report = search(pm, fcfg, pm.dates[lo], pm.dates[row])
        for w in report.warnings:
            log.warning("%s: %s", pm.dates[row], w)
        for sa in report.statarbs:
            if sa.key in seen:
                continue
            seen.add(sa.key)
            res, m = _run_one(sa, pm, bcfg, pm.dates[row + 1])
            end = res.termination_date if res.terminated_early else res.dates[-1]
            intervals.append((res.dates[0], end))
            metrics.append(m)
            records.append({
                **sa.to_dict(),
                "search_date": pm.dates[row],
                "trade_start": res.dates[0],
                "trade_end": end,
                "metrics": m.to_dict(),
            })
    _dump_json(records, out / "statarbs.json")
    _dump_json(aggregate(metrics), out / "summary.json")
    with open(out / "active_counts.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "active"])
        w.writerows(active_counts(pm, intervals))
    return 0


COMMANDS = {"simulate": cmd_simulate, "find": cmd_find, "backtest": cmd_backtest, "roll": cmd_roll}


def main(argv=None) -> int:
    parser = build_parser()
    args = _apply_config(parser, argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (CliError, PriceDataError, InsufficientWarmupError, bt.BacktestError,
            OSError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        sys.stderr.write(f"error: {msg}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
