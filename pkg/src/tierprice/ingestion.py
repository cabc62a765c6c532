"""CSV ingestion of license, usage and customer tables, and monthly aggregation.

Input schemas (UTF-8, header row required, any column order)::

    sales_facts.csv     customer_guid,end_users,effective_date,expiration_date,invoiced_amount,channel
    org_stats.csv       customer_guid,month,request_count
    customers.csv       guid,name
    actual_invoices.csv month,total_invoiced

Dates are ``YYYY-MM``; day-level dates are truncated to the month. A license
is active in month ``m`` when ``effective <= m < expiration`` and its invoiced
amount is spread uniformly over the months of its term.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from .errors import DegenerateSeriesError, ParseError
from .months import MonthKey, month_range
from .timeseries import MonthlySeries

SALES_COLUMNS = (
    "customer_guid",
    "end_users",
    "effective_date",
    "expiration_date",
    "invoiced_amount",
    "channel",
)
USAGE_COLUMNS = ("customer_guid", "month", "request_count")
CUSTOMER_COLUMNS = ("guid", "name")
ACTUALS_COLUMNS = ("month", "total_invoiced")

SALES_FILE = "sales_facts.csv"
USAGE_FILE = "org_stats.csv"
CUSTOMERS_FILE = "customers.csv"
ACTUALS_FILE = "actual_invoices.csv"

MAX_TERM_MONTHS = 12


@dataclass(frozen=True)
class LicenseRecord:
    customer_guid: str
    end_users: int
    effective: MonthKey
    expiration: MonthKey
    invoiced_amount: float
    channel: str = ""

    @property
    def term_months(self) -> int:
        return self.expiration - self.effective

    def is_active(self, month: MonthKey) -> bool:
        return self.effective <= month < self.expiration

    def monthly_amount(self) -> float:
        term = self.term_months
        return self.invoiced_amount / term if term > 0 else 0.0


@dataclass(frozen=True)
class UsageRecord:
    customer_guid: str
    month: MonthKey
    request_count: int


@dataclass(frozen=True)
class CustomerInfo:
    guid: str
    name: str


@dataclass(frozen=True)
class MonthlyAggregate:
    month: MonthKey
    active_licenses: int
    invoiced_total: float
    request_total: int


# -- parsing -----------------------------------------------------------------


def _read_rows(path, columns):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(path, 1, "<header>", "empty file, header row required")
        unknown = [h for h in header if h not in columns]
        if unknown:
            raise ParseError(path, 1, unknown[0], "unknown column")
        missing = [c for c in columns if c not in header]
        if missing:
            raise ParseError(path, 1, missing[0], "missing column")
        if len(set(header)) != len(header):
            raise ParseError(path, 1, "<header>", "duplicate column")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    path, line, "<row>", f"expected {len(header)} fields, got {len(row)}"
                )
            yield line, dict(zip(header, (c.strip() for c in row)))


def _month(path, line, field, text):
    try:
        return MonthKey.parse(text)
    except ValueError as exc:
        raise ParseError(path, line, field, str(exc)) from None


def _count(path, line, field, text):
    try:
        value = int(text)
    except ValueError:
        raise ParseError(path, line, field, f"not an integer: {text!r}") from None
    if value < 0:
        raise ParseError(path, line, field, f"negative count {value}")
    return value


def _money(path, line, field, text):
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise ParseError(path, line, field, f"not a number: {text!r}") from None
    if not value.is_finite():
        raise ParseError(path, line, field, f"not a finite amount: {text!r}")
    if value < 0:
        raise ParseError(path, line, field, f"negative amount {text}")
    if value.as_tuple().exponent < -2:
        raise ParseError(path, line, field, f"more than 2 fraction digits: {text}")
    return value


def read_licenses(path) -> list[LicenseRecord]:
    out = []
    for line, row in _read_rows(path, SALES_COLUMNS):
        guid = row["customer_guid"]
        if not guid:
            raise ParseError(path, line, "customer_guid", "empty id")
        eff = _month(path, line, "effective_date", row["effective_date"])
        exp = _month(path, line, "expiration_date", row["expiration_date"])
        if exp < eff:
            raise ParseError(path, line, "expiration_date", "precedes effective_date")
        if exp - eff > MAX_TERM_MONTHS:
            raise ParseError(
                path, line, "expiration_date", f"term exceeds {MAX_TERM_MONTHS} months"
            )
        out.append(
            LicenseRecord(
                customer_guid=guid,
                end_users=_count(path, line, "end_users", row["end_users"]),
                effective=eff,
                expiration=exp,
                invoiced_amount=float(
                    _money(path, line, "invoiced_amount", row["invoiced_amount"])
                ),
                channel=row["channel"],
            )
        )
    return out


def read_usage(path) -> list[UsageRecord]:
    """Read usage rows; duplicate (customer, month) rows are summed."""
    totals: dict[tuple[str, MonthKey], int] = {}
    for line, row in _read_rows(path, USAGE_COLUMNS):
        guid = row["customer_guid"]
        if not guid:
            raise ParseError(path, line, "customer_guid", "empty id")
        key = (guid, _month(path, line, "month", row["month"]))
        totals[key] = totals.get(key, 0) + _count(
            path, line, "request_count", row["request_count"]
        )
    return [
        UsageRecord(g, m, c)
        for (g, m), c in sorted(totals.items(), key=lambda kv: (kv[0][0], kv[0][1]))
    ]


def read_customers(path) -> list[CustomerInfo]:
    seen = set()
    out = []
    for line, row in _read_rows(path, CUSTOMER_COLUMNS):
        guid = row["guid"]
        if not guid:
            raise ParseError(path, line, "guid", "empty id")
        if guid in seen:
            raise ParseError(path, line, "guid", f"duplicate guid {guid}")
        seen.add(guid)
        out.append(CustomerInfo(guid, row["name"]))
    return out


def read_actual_invoices(path) -> dict[MonthKey, Decimal]:
    out = {}
    for line, row in _read_rows(path, ACTUALS_COLUMNS):
        m = _month(path, line, "month", row["month"])
        if m in out:
            raise ParseError(path, line, "month", f"duplicate month {m}")
        out[m] = _money(path, line, "total_invoiced", row["total_invoiced"])
    return out


def parse_tables(data_dir):
    """Parse the three warehouse exports found in ``data_dir``.

    ``customers.csv`` is optional; the license and usage tables are not.

    Returns
    -------
    (licenses, usage, customers)
    """
    data_dir = Path(data_dir)
    licenses = read_licenses(data_dir / SALES_FILE)
    usage = read_usage(data_dir / USAGE_FILE)
    cpath = data_dir / CUSTOMERS_FILE
    customers = read_customers(cpath) if cpath.exists() else []
    return licenses, usage, customers


# -- serialization -----------------------------------------------------------


def _writer(path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def write_licenses(path, records):
    fh, w = _writer(path)
    with fh:
        w.writerow(SALES_COLUMNS)
        for r in records:
            w.writerow(
                [
                    r.customer_guid,
                    r.end_users,
                    str(r.effective),
                    str(r.expiration),
                    f"{r.invoiced_amount:.2f}",
                    r.channel,
                ]
            )


def write_usage(path, records):
    fh, w = _writer(path)
    with fh:
        w.writerow(USAGE_COLUMNS)
        for r in records:
            w.writerow([r.customer_guid, str(r.month), r.request_count])


def write_customers(path, customers):
    fh, w = _writer(path)
    with fh:
        w.writerow(CUSTOMER_COLUMNS)
        for c in customers:
            w.writerow([c.guid, c.name])


def write_actual_invoices(path, actuals):
    fh, w = _writer(path)
    with fh:
        w.writerow(ACTUALS_COLUMNS)
        for m in sorted(actuals):
            w.writerow([str(m), f"{Decimal(actuals[m]):.2f}"])


def write_aggregates(path, aggregates):
    fh, w = _writer(path)
    with fh:
        w.writerow(["month", "active_licenses", "invoiced_total", "request_total"])
        for a in aggregates:
            w.writerow(
                [str(a.month), a.active_licenses, f"{a.invoiced_total:.2f}", a.request_total]
            )


# -- aggregation -------------------------------------------------------------


def active_licenses(records, month: MonthKey) -> int:
    """Licensed end users active in ``month``.

    Equals last month's count plus licenses starting this month minus those
    expiring at the start of this month.
    """
    return sum(r.end_users for r in records if r.is_active(month))


def licenses_by_customer(records, month: MonthKey) -> dict[str, int]:
    out: dict[str, int] = defaultdict(int)
    for r in records:
        if r.is_active(month):
            out[r.customer_guid] += r.end_users
    return dict(out)


def invoiced_by_customer(records, month: MonthKey) -> dict[str, float]:
    """Prorated license revenue per customer for ``month``."""
    parts: dict[str, list[float]] = defaultdict(list)
    for r in sorted(records, key=_license_sort_key):
        if r.is_active(month):
            parts[r.customer_guid].append(r.monthly_amount())
    return {g: math.fsum(v) for g, v in parts.items()}


def _license_sort_key(r):
    return (r.customer_guid, r.effective, r.expiration, r.end_users, r.invoiced_amount)


def monthly_aggregates(licenses, usage, window) -> list[MonthlyAggregate]:
    """One aggregate per month of the inclusive ``window``."""
    start, end = window
    if end < start:
        raise ValueError("window is empty")
    months = month_range(start, end)
    ordered = sorted(licenses, key=_license_sort_key)
    requests: dict[MonthKey, int] = defaultdict(int)
    for u in usage:
        if start <= u.month <= end:
            requests[u.month] += u.request_count
    out = []
    for m in months:
        active = [r for r in ordered if r.is_active(m)]
        out.append(
            MonthlyAggregate(
                month=m,
                active_licenses=sum(r.end_users for r in active),
                invoiced_total=math.fsum(r.monthly_amount() for r in active),
                request_total=requests.get(m, 0),
            )
        )
    return out


def price_per_request_series(aggregates) -> MonthlySeries:
    """Dollars per request, ``invoiced_total / request_total``, month by month."""
    if not aggregates:
        raise ValueError("no aggregates")
    for prev, cur in zip(aggregates, aggregates[1:]):
        if cur.month - prev.month != 1:
            raise ValueError(f"aggregates are not consecutive at {cur.month}")
    for a in aggregates:
        if a.request_total <= 0:
            raise DegenerateSeriesError(f"no requests recorded in {a.month}")
    vals = np.array([a.invoiced_total / a.request_total for a in aggregates])
    return MonthlySeries(aggregates[0].month, vals)
