"""Usage-based tiered pricing from license and request-volume history."""

from .arima import ARIMA, ARIMASelector, ArimaFit, ArimaSpec, fit_arima, select_model
from .audit import UnderReportingDetector, flag_under_reporters, monthly_audit_report
from .errors import (
    ConvergenceError,
    DegenerateSeriesError,
    DomainError,
    InsufficientDataError,
    ModelSelectionError,
    ParseError,
    SingularMatrixError,
    TierPriceError,
)
from .ingestion import monthly_aggregates, parse_tables, price_per_request_series
from .months import MonthKey
from .pricing import TierPricer, TierTable, build_tiers, project_invoices
from .spline import SmoothingSpline, fit_spline, lambda_from_prior
from .stationarity import adf_test, pp_test
from .timeseries import MonthlySeries, acf, difference

__version__ = "0.1.0"

__all__ = [
    "ARIMA",
    "ARIMASelector",
    "ArimaFit",
    "ArimaSpec",
    "ConvergenceError",
    "DegenerateSeriesError",
    "DomainError",
    "InsufficientDataError",
    "ModelSelectionError",
    "MonthKey",
    "MonthlySeries",
    "ParseError",
    "SingularMatrixError",
    "SmoothingSpline",
    "TierPriceError",
    "TierPricer",
    "TierTable",
    "UnderReportingDetector",
    "acf",
    "adf_test",
    "build_tiers",
    "difference",
    "fit_arima",
    "fit_spline",
    "flag_under_reporters",
    "lambda_from_prior",
    "monthly_aggregates",
    "monthly_audit_report",
    "parse_tables",
    "pp_test",
    "price_per_request_series",
    "project_invoices",
    "select_model",
]
