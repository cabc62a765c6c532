"""Command-line entry point: ``tierprice <command> [options]``.

Settings come from, in order of precedence, command-line flags, a
``key = value`` config file given with ``--config``, and built-in defaults.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import fixtures, pipeline
from .errors import ParseError, TierPriceError
from .months import MonthKey, parse_window

log = logging.getLogger("tierprice")

CONFIG_KEYS = {
    "data_dir": Path,
    "out_dir": Path,
    "window": parse_window,
    "alpha": float,
    "beta": float,
    "multiplier": float,
    "breakpoints": lambda s: tuple(float(v) for v in s.split(",")),
    "significance": float,
    "bucket_width": float,
    "unit_price": float,
    "caps": lambda s: tuple(int(v) for v in s.split(",")),
}


def read_config(path) -> dict:
    """Parse a ``key = value`` file. Blank lines and ``#`` comments are skipped."""
    path = Path(path)
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in CONFIG_KEYS:
                raise ParseError(path, lineno, key or "?", "expected 'key = value' with a known key")
            try:
                out[key] = CONFIG_KEYS[key](value.strip())
            except ValueError as exc:
                raise ParseError(path, lineno, key, str(exc)) from None
    return out


def _csv_floats(s):
    return tuple(float(v) for v in s.split(","))


def _csv_ints(s):
    return tuple(int(v) for v in s.split(","))


def _common(p):
    p.add_argument("--config", type=Path, help="key = value settings file")
    p.add_argument("--data-dir", type=Path, help="directory holding the CSV exports (default: data)")
    p.add_argument("--out-dir", type=Path, help="directory for outputs (default: out)")
    p.add_argument("--window", type=parse_window, help="analysis window YYYY-MM..YYYY-MM (default: 2015-11..2016-12)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tierprice", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-fixture", help="write a synthetic data directory")
    g.add_argument("--data-dir", type=Path, required=True)
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--customers", type=int, default=200)
    g.add_argument("--months", type=int, default=14)
    g.add_argument("--under-reporters", type=int, default=3)
    g.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("ingest", help="aggregate monthly totals and price per request")
    _common(p)

    p = sub.add_parser("analyze", help="unit-root tests, ARIMA ranking and smoothing spline")
    _common(p)
    p.add_argument("--alpha", type=float, help="inverse-gamma prior shape for the spline penalty")
    p.add_argument("--beta", type=float, help="inverse-gamma prior scale for the spline penalty")
    p.add_argument("--significance", type=float, help="unit-root test level (default: 0.05)")

    p = sub.add_parser("price", help="build tiers and project invoices")
    _common(p)
    p.add_argument("--breakpoints", type=_csv_floats, help="comma-separated percentiles")
    p.add_argument("--caps", type=_csv_ints, help="explicit tier caps, overrides --breakpoints")
    p.add_argument("--unit-price", type=float, help="price per request, overrides analysis.json")
    p.add_argument("--bucket-width", type=float, help="histogram bucket width (default: 10)")

    p = sub.add_parser("audit", help="flag likely under-reporting customers")
    _common(p)
    p.add_argument("--month", type=MonthKey.parse, help="month to audit (default: window end)")
    p.add_argument("--multiplier", type=float, help="flag above this multiple of typical usage")

    p = sub.add_parser("run", help="ingest, analyze, price and audit in one go")
    _common(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--significance", type=float)
    p.add_argument("--breakpoints", type=_csv_floats)
    p.add_argument("--caps", type=_csv_ints)
    p.add_argument("--unit-price", type=float)
    p.add_argument("--bucket-width", type=float)
    p.add_argument("--month", type=MonthKey.parse)
    p.add_argument("--multiplier", type=float)
    return parser


def make_config(args) -> pipeline.PipelineConfig:
    settings = read_config(args.config) if getattr(args, "config", None) else {}
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return pipeline.PipelineConfig(**settings)


def _cmd_gen_fixture(args):
    planted = fixtures.write_fixture(
        args.data_dir,
        seed=args.seed,
        customers=args.customers,
        months=args.months,
        under_reporters=args.under_reporters,
    )
    print(f"wrote synthetic exports to {args.data_dir} ({len(planted)} planted under-reporters)")


def _cmd_ingest(args):
    cfg = make_config(args)
    series = pipeline.run_ingest(cfg)
    print(f"{len(series)} months written to {cfg.out_dir / 'price_series.csv'}")


def _print_analysis(report):
    for key, label in (("adf_first_difference", "ADF"), ("pp_first_difference", "PP")):
        res = report[key]
        if res is not None:
            print(f"{label}: statistic {res['statistic']:.4f}, p = {res['p_value']:.4f}. {res['decision']}")
    a, s = report["arima"], report["spline"]
    print(f"best ARIMA: {a['best']} (AIC {a['aic']:.4f}), MSE {a['mse']:.6e}, median {a['median']:.6f}")
    print(f"spline: lambda {s['lambda']:.4f}, MSE {s['mse']:.6e}, median {s['median']:.6f}")
    print(f"stable price per request: {report['stable_price_display']} ({report['chosen_model']})")


def _cmd_analyze(args):
    _print_analysis(pipeline.run_analyze(make_config(args)))


def _print_price(result):
    print(f"tiers: caps {result['table'].caps}")
    print(f"projected total for {result['month']}: {result['total']:.2f}")
    for c in result["comparisons"]:
        print(f"  {c.month}: actual {c.actual:.2f}, projected {c.projected:.2f}, change {c.pct_change:.2f}%")


def _cmd_price(args):
    _print_price(pipeline.run_price(make_config(args)))


def _print_audit(report, cfg):
    n = len(report["findings"])
    print(f"audit {report['month']}: {n} flagged of {report['customers']} customers")
    print(f"report written to {cfg.out_dir / 'audit' / (report['month'] + '.json')}")


def _cmd_audit(args):
    cfg = make_config(args)
    _print_audit(pipeline.run_audit(cfg, args.month), cfg)


def _cmd_run(args):
    cfg = make_config(args)
    pipeline.run_ingest(cfg)
    _print_analysis(pipeline.run_analyze(cfg))
    _print_price(pipeline.run_price(cfg))
    _print_audit(pipeline.run_audit(cfg, args.month), cfg)


COMMANDS = {
    "gen-fixture": _cmd_gen_fixture,
    "ingest": _cmd_ingest,
    "analyze": _cmd_analyze,
    "price": _cmd_price,
    "audit": _cmd_audit,
    "run": _cmd_run,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="tierprice: %(levelname)s: %(message)s",
    )
    try:
        COMMANDS[args.command](args)
    except (TierPriceError, ValueError, OSError) as exc:
        print(f"tierprice: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
