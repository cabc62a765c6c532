"""End-to-end workflow: ingest, analyze, price, audit.

Every step reads its inputs from ``data_dir`` / ``out_dir`` and writes plain
CSV or JSON files, so steps can be rerun independently.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import arima, audit, ingestion, pricing, spline, stationarity
from .errors import InsufficientDataError, TierPriceError
from .months import MonthKey, month_range
from .timeseries import MonthlySeries, acf, difference

log = logging.getLogger("tierprice")

DEFAULT_WINDOW = (MonthKey(2015, 11), MonthKey(2016, 12))
SIGNIFICANCE = 0.05


@dataclass
class PipelineConfig:
    data_dir: Path = Path("data")
    out_dir: Path = Path("out")
    window: tuple = DEFAULT_WINDOW
    alpha: float = spline.DEFAULT_ALPHA  # inverse-gamma prior shape
    beta: float = spline.DEFAULT_BETA  # inverse-gamma prior scale
    multiplier: float = audit.DEFAULT_MULTIPLIER
    breakpoints: tuple = pricing.DEFAULT_BREAKPOINTS
    significance: float = SIGNIFICANCE
    bucket_width: float = 10.0
    unit_price: float | None = None
    caps: tuple | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data_dir = Path(self.data_dir)
        self.out_dir = Path(self.out_dir)
        if not self.window[0] < self.window[1]:
            raise ValueError("analysis window start must precede its end")


def _load(config):
    return ingestion.parse_tables(config.data_dir)


def run_ingest(config: PipelineConfig):
    """Write ``aggregates.csv`` and ``price_series.csv``; returns the series."""
    licenses, usage, _ = _load(config)
    aggs = ingestion.monthly_aggregates(licenses, usage, config.window)
    series = ingestion.price_per_request_series(aggs)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    ingestion.write_aggregates(config.out_dir / "aggregates.csv", aggs)
    write_series(config.out_dir / "price_series.csv", series)
    return series


def write_series(path, series: MonthlySeries):
    # repr keeps full precision for the downstream analysis step
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "value"])
        for m, v in series.items():
            w.writerow([str(m), repr(v)])


def read_series(path) -> MonthlySeries:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"price series not found: {path} (run ingest first)")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InsufficientDataError(f"{path} is empty")
    months = [MonthKey.parse(r["month"]) for r in rows]
    if months != month_range(months[0], months[-1]):
        raise ValueError(f"{path}: months are not consecutive")
    return MonthlySeries(months[0], np.array([float(r["value"]) for r in rows]))


def _unit_root(fn, series, **kw):
    try:
        return fn(series, **kw)
    except InsufficientDataError as exc:
        log.warning("%s skipped: %s", fn.__name__, exc)
        return None


def analyze_series(series: MonthlySeries, config: PipelineConfig):
    """Run the full model comparison on a price-per-request series.

    Returns the JSON-ready report plus the two fitted models.
    """
    levels_acf = acf(series)
    diff = difference(series, 1)
    diff_acf = acf(diff)
    adf = _unit_root(stationarity.adf_test, diff, regression="drift")
    pp = _unit_root(stationarity.pp_test, diff, regression="none")

    best, ranking, failures = arima.select_model(series)
    for spec, exc in sorted(failures.items(), key=lambda kv: kv[0].order):
        log.warning("%s not ranked: %s", spec, exc)
    arima_mse = arima.mse(best, series)
    arima_median = arima.fitted_median(best)

    lam = spline.lambda_from_prior(spline.PriorSpec(config.alpha, config.beta))
    xs = np.arange(1.0, len(series) + 1.0)
    knots = spline.select_knots(xs)
    sfit = spline.fit_spline(xs, series.values, lam, knots)
    spline_mse = spline.spline_mse(sfit, xs, series.values)
    spline_median = spline.stable_price(sfit)

    chosen = "spline" if spline_mse <= arima_mse else "arima"
    price = spline_median if chosen == "spline" else arima_median

    def test_block(res):
        if res is None:
            return None
        d = res.to_dict()
        d["reject"] = res.reject(config.significance)
        d["decision"] = stationarity.decision_text(res, config.significance)
        return d

    report = {
        "window": [str(series.start), str(series.end)],
        "n": len(series),
        "significance": config.significance,
        "acf_levels": [round(v, 6) for v in levels_acf.coefficients.tolist()],
        "acf_first_difference": [round(v, 6) for v in diff_acf.coefficients.tolist()],
        "adf_first_difference": test_block(adf),
        "pp_first_difference": test_block(pp),
        "arima": {
            "best": str(best.spec),
            "order": list(best.spec.order),
            "ar": best.ar.tolist(),
            "ma": best.ma.tolist(),
            "mean": best.mean,
            "aic": best.aic,
            "mse": arima_mse,
            "median": arima_median,
            "ranking": [
                {"order": list(r.spec.order), "loglik": r.loglik, "aic": r.aic} for r in ranking
            ],
            "failed": [list(s.order) for s in sorted(failures, key=lambda s: s.order)],
        },
        "spline": {
            "lambda": lam,
            "knots": knots.tolist(),
            "mse": spline_mse,
            "median": spline_median,
        },
        "chosen_model": chosen,
        "stable_price": price,
        "stable_price_display": f"{price:.6f}",
    }
    return report, best, ranking, failures, sfit, levels_acf, diff_acf


def run_analyze(config: PipelineConfig):
    series = read_series(config.out_dir / "price_series.csv")
    report, best, ranking, failures, sfit, levels_acf, diff_acf = analyze_series(series, config)
    out = config.out_dir
    levels_acf.to_csv(out / "acf_levels.csv")
    diff_acf.to_csv(out / "acf_first_difference.csv")
    arima.write_ranking_csv(out / "arima_ranking.csv", ranking, failures)
    spline.write_spline_outputs(out / "spline_fit.csv", out / "spline_fit.json", sfit, series.values)
    _write_json(out / "analysis.json", report)
    return report


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def stable_price_from(config: PipelineConfig) -> float:
    if config.unit_price is not None:
        return float(config.unit_price)
    path = config.out_dir / "analysis.json"
    if not path.exists():
        raise FileNotFoundError(f"{path} not found (run analyze first or pass --unit-price)")
    with open(path, encoding="utf-8") as fh:
        return float(json.load(fh)["stable_price"])


def run_price(config: PipelineConfig):
    """Write tiers, projections, invoice comparisons and change histograms."""
    licenses, usage, _ = _load(config)
    unit_price = stable_price_from(config)
    start, end = config.window
    if config.caps is not None:
        table = pricing.TierTable.from_caps(config.caps, unit_price, config.breakpoints)
    else:
        pooled = [u.request_count for u in usage if start <= u.month <= end]
        table = pricing.build_tiers(pooled, unit_price, config.breakpoints)
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "tiers.csv")

    actuals_path = config.data_dir / ingestion.ACTUALS_FILE
    actuals = {}
    if actuals_path.exists():
        actuals = ingestion.read_actual_invoices(actuals_path)
    else:
        log.warning("%s not found; invoice comparison skipped", actuals_path)

    usage_months = {u.month for u in usage}
    compare_months = sorted(m for m in actuals if m in usage_months)
    month = compare_months[0] if compare_months else end

    total, rows = pricing.project_invoices(usage, table, month)
    pricing.write_projection_csv(out / "projection.csv", rows)

    comparisons = []
    for m in compare_months:
        projected, _ = pricing.project_invoices(usage, table, m)
        comparisons.append(pricing.compare_invoices(actuals[m], projected, m))
    if actuals:
        pricing.write_comparison_csv(out / "comparison.csv", comparisons)

    old_by = ingestion.invoiced_by_customer(licenses, month)
    old = np.array([old_by.get(r.guid, 0.0) for r in rows])
    new = np.array([float(r.charge) for r in rows])
    pricing.write_histogram_csv(
        out / "histogram.csv",
        pricing.change_distribution(old, new, "dollars", config.bucket_width),
    )
    paying = old > 0
    pricing.write_histogram_csv(
        out / "histogram_percent.csv",
        pricing.change_distribution(old[paying], new[paying], "percent", config.bucket_width),
    )
    return {"table": table, "month": month, "total": total, "comparisons": comparisons}


def run_audit(config: PipelineConfig, month: MonthKey | None = None):
    licenses, usage, customers = _load(config)
    month = month or config.window[1]
    tiers_path = config.out_dir / "tiers.csv"
    table = pricing.TierTable.from_csv(tiers_path) if tiers_path.exists() else None
    if table is None:
        log.warning("%s not found; tier census omitted", tiers_path)
    audit_dir = config.out_dir / "audit"
    report = audit.monthly_audit_report(
        month,
        licenses,
        usage,
        table=table,
        history_dir=audit_dir,
        multiplier=config.multiplier,
        customers=customers,
    )
    audit.write_report(report, audit_dir)
    return report


def run_all(config: PipelineConfig, audit_month: MonthKey | None = None):
    run_ingest(config)
    run_analyze(config)
    run_price(config)
    return run_audit(config, audit_month)


__all__ = [
    "PipelineConfig",
    "TierPriceError",
    "analyze_series",
    "run_all",
    "run_analyze",
    "run_audit",
    "run_ingest",
    "run_price",
]
