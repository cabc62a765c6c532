"""Percentile-tiered pricing: tier tables, charges, invoice projection and
change distributions.

Money is handled as :class:`decimal.Decimal`. Charges are rounded half-up to
cents at the moment they are charged; everything before that runs at full
precision.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_1d_float, as_counts
from .months import MonthKey

CENT = Decimal("0.01")
DEFAULT_BREAKPOINTS = (25, 35, 45, 55, 65, 78, 85)
MAX_TIERS = 10

# Published reference tier schedule and invoice comparison (month, actual,
# projected, printed difference, printed pct change).
REFERENCE_CAPS = (535, 855, 1280, 1870, 2765, 4620, 6975)
REFERENCE_PRICES = ("4.37", "6.98", "10.45", "15.27", "22.58", "37.74", "56.97")
REFERENCE_UNIT_PRICE = 0.008168
REFERENCE_INVOICES = (
    ("2017-01", "252473.10", "239738.073", "12735.010", -5.04),
    ("2017-02", "251774.00", "223626.410", "28147.600", -11.18),
    ("2017-03", "253151.80", "246359.841", "6791.974", -2.68),
    ("2017-04", "252576.50", "225071.387", "27505.120", -10.89),
)


def to_decimal(x) -> Decimal:
    if isinstance(x, Decimal):
        return x
    if isinstance(x, (int, np.integer)):
        return Decimal(int(x))
    return Decimal(repr(float(x)))


def round_cents(x) -> Decimal:
    """Round half-up to whole cents."""
    return to_decimal(x).quantize(CENT, rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class Tier:
    index: int
    pct_low: float
    pct_high: float
    cap: int | None  # None: unbounded, metered
    price: Decimal | None  # flat monthly price; None when metered

    @property
    def metered(self) -> bool:
        return self.cap is None


@dataclass(frozen=True)
class TierTable:
    tiers: tuple
    unit_price: float

    def __post_init__(self):
        if not 2 <= len(self.tiers) <= MAX_TIERS:
            raise ValueError(f"a tier table has 2..{MAX_TIERS} tiers")
        caps = [t.cap for t in self.tiers[:-1]]
        if any(c is None for c in caps) or not self.tiers[-1].metered:
            raise ValueError("only the last tier is metered")
        if any(b <= a for a, b in zip(caps, caps[1:])):
            raise ValueError(f"tier caps must be strictly increasing, got {caps}")

    @classmethod
    def from_caps(cls, caps, unit_price, breakpoints=DEFAULT_BREAKPOINTS):
        """Table with the given caps; flat prices are ``round_cents(cap * unit_price)``."""
        caps = [int(c) for c in caps]
        breakpoints = list(breakpoints)
        if len(caps) != len(breakpoints):
            raise ValueError("need one cap per breakpoint")
        if not unit_price > 0:
            raise ValueError(f"unit price must be positive, got {unit_price}")
        edges = [0.0] + [b / 100.0 for b in breakpoints] + [1.0]
        up = to_decimal(unit_price)
        tiers = [
            Tier(i + 1, edges[i], edges[i + 1], cap, round_cents(Decimal(cap) * up))
            for i, cap in enumerate(caps)
        ]
        tiers.append(Tier(len(caps) + 1, edges[-2], 1.0, None, None))
        table = cls(tuple(tiers), float(unit_price))
        _check_boundary_continuity(table)
        return table

    @property
    def caps(self) -> list[int]:
        return [t.cap for t in self.tiers[:-1]]

    def assign(self, requests: int) -> Tier:
        """Smallest tier whose cap is at least ``requests``; the metered tier above."""
        if requests < 0:
            raise ValueError("requests must be nonnegative")
        for t in self.tiers[:-1]:
            if requests <= t.cap:
                return t
        return self.tiers[-1]

    def charge(self, requests: int) -> Decimal:
        tier = self.assign(requests)
        if tier.metered:
            return round_cents(to_decimal(self.unit_price) * Decimal(int(requests)))
        return tier.price

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "pct_low", "pct_high", "cap", "price"])
            for t in self.tiers:
                price = f"{self.unit_price:.6f}" if t.metered else f"{t.price:.2f}"
                cap = "" if t.metered else t.cap
                w.writerow([t.index, f"{t.pct_low:.2f}", f"{t.pct_high:.2f}", cap, price])

    @classmethod
    def from_csv(cls, path):
        """Read a table written by :meth:`to_csv`; an empty cap marks the metered tier."""
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        tiers = []
        unit_price = None
        for r in rows:
            if r["cap"] == "":
                unit_price = float(r["price"])
                tiers.append(Tier(int(r["index"]), float(r["pct_low"]), float(r["pct_high"]), None, None))
            else:
                tiers.append(
                    Tier(int(r["index"]), float(r["pct_low"]), float(r["pct_high"]), int(r["cap"]), Decimal(r["price"]))
                )
        if unit_price is None:
            raise ValueError(f"{path}: no metered tier")
        return cls(tuple(tiers), unit_price)


def _check_boundary_continuity(table):
    # the first metered charge sits within one unit price (plus rounding) of the top flat price
    last = table.tiers[-2]
    jump = table.charge(last.cap + 1) - last.price
    bound = to_decimal(table.unit_price) + CENT
    assert abs(jump) <= bound, f"discontinuity {jump} at the metered boundary"


def _check_breakpoints(breakpoints):
    bp = [float(b) for b in breakpoints]
    if not bp:
        raise ValueError("need at least one breakpoint")
    if len(bp) > MAX_TIERS - 1:
        raise ValueError(f"at most {MAX_TIERS - 1} breakpoints ({MAX_TIERS} tiers)")
    if any(b <= a for a, b in zip(bp, bp[1:])):
        raise ValueError(f"breakpoints must be strictly increasing, got {bp}")
    if bp[0] <= 0 or bp[-1] >= 100:
        raise ValueError("breakpoints are percentages strictly between 0 and 100")
    return bp


def percentile_caps(monthly_requests, breakpoints=DEFAULT_BREAKPOINTS) -> list[int]:
    """Request caps at the given percentiles of the pooled customer-month counts.

    Percentiles interpolate linearly between order statistics and are
    floored to whole requests.
    """
    bp = _check_breakpoints(breakpoints)
    data = as_counts(monthly_requests, name="monthly_requests")
    if data.size == 0:
        raise ValueError("no usage data")
    caps = [int(math.floor(v)) for v in np.percentile(data, bp, method="linear")]
    if any(b <= a for a, b in zip(caps, caps[1:])):
        raise ValueError(f"usage distribution gives non-increasing caps {caps}")
    return caps


def build_tiers(monthly_requests, unit_price, breakpoints=DEFAULT_BREAKPOINTS) -> TierTable:
    """Tier table from the pooled per-customer monthly request counts."""
    if not unit_price > 0:
        raise ValueError(f"unit price must be positive, got {unit_price}")
    caps = percentile_caps(monthly_requests, breakpoints)
    return TierTable.from_caps(caps, unit_price, breakpoints)


def assign_tier(requests: int, table: TierTable) -> Tier:
    return table.assign(requests)


def monthly_charge(requests: int, table: TierTable) -> Decimal:
    """Flat tier price, or the metered ``unit_price * requests`` in cents for the top tier."""
    return table.charge(requests)


@dataclass(frozen=True)
class ProjectionRow:
    guid: str
    requests: int
    tier: int
    charge: Decimal


def project_invoices(usage, table: TierTable, month: MonthKey):
    """Charge every customer with usage in ``month``.

    Returns ``(total, rows)`` with rows sorted by customer guid.
    """
    counts: dict[str, int] = defaultdict(int)
    for u in usage:
        if u.month == month:
            counts[u.customer_guid] += u.request_count
    rows = []
    for guid in sorted(counts):
        n = counts[guid]
        rows.append(ProjectionRow(guid, n, table.assign(n).index, table.charge(n)))
    total = sum((r.charge for r in rows), Decimal("0.00"))
    return total, rows


def write_projection_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["guid", "requests", "tier", "charge"])
        for r in rows:
            w.writerow([r.guid, r.requests, r.tier, f"{r.charge:.2f}"])


@dataclass(frozen=True)
class InvoiceComparison:
    month: MonthKey | None
    actual: Decimal
    projected: Decimal
    difference: Decimal  # actual - projected, in cents
    pct_change: float  # (projected - actual) / actual * 100


def compare_invoices(actual, projected, month=None) -> InvoiceComparison:
    actual, projected = to_decimal(actual), to_decimal(projected)
    if actual <= 0:
        raise ValueError("actual invoice total must be positive")
    pct = float((projected - actual) / actual * 100)
    return InvoiceComparison(month, actual, projected, round_cents(actual - projected), pct)


def reference_invoice_discrepancies(tolerance=Decimal("0.005")):
    """Rows of the reference invoice table whose printed difference disagrees
    with its own actual and projected columns by more than ``tolerance``.

    Returns ``(month, printed, computed)`` tuples.
    """
    out = []
    for month, actual, projected, printed, _ in REFERENCE_INVOICES:
        exact = Decimal(actual) - Decimal(projected)
        if abs(exact - Decimal(printed)) > tolerance:
            out.append((month, Decimal(printed), round_cents(exact)))
    return out


def write_comparison_csv(path, comparisons):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "actual", "projected", "difference", "pct_change"])
        for c in comparisons:
            w.writerow(
                [str(c.month), f"{c.actual:.2f}", f"{round_cents(c.projected):.2f}", f"{c.difference:.2f}", f"{c.pct_change:.2f}"]
            )


@dataclass(frozen=True)
class ChangeBucket:
    lower: float | None  # None: open below
    upper: float | None  # None: open above
    count: int
    overflow: bool


def change_distribution(old_charges, new_charges, mode="dollars", bucket_width=10.0, limit=100.0):
    """Histogram of per-customer charge changes ``new - old``.

    Buckets are ``[k*w, (k+1)*w)``, aligned at zero. Changes beyond ``+limit``
    go to a right overflow bucket; in dollar mode changes below ``-limit`` go
    to a left overflow bucket. Percent changes cannot fall below -100%, so
    percent mode has no left overflow. Only the occupied range is returned,
    empty buckets inside it included.
    """
    old = as_1d_float(old_charges, name="old_charges", min_length=0)
    new = as_1d_float(new_charges, name="new_charges", min_length=0)
    if old.size != new.size:
        raise ValueError("old and new charges are not aligned")
    if not bucket_width > 0:
        raise ValueError("bucket_width must be positive")
    if mode == "dollars":
        delta = new - old
        lo_limit = -limit
    elif mode == "percent":
        if np.any(old <= 0):
            raise ValueError("percent changes need positive old charges")
        delta = (new - old) / old * 100.0
        lo_limit = None
    else:
        raise ValueError("mode must be 'dollars' or 'percent'")
    if delta.size == 0:
        return []

    left = int(np.sum(delta < lo_limit)) if lo_limit is not None else 0
    right = int(np.sum(delta > limit))
    inside = delta[(delta <= limit) & ((delta >= lo_limit) if lo_limit is not None else True)]
    buckets = []
    if left:
        buckets.append(ChangeBucket(None, lo_limit, left, True))
    if inside.size:
        k = np.floor(inside / bucket_width + 1e-12).astype(np.int64)
        # a change of exactly +limit belongs to the last bucket below the overflow
        k = np.minimum(k, int(math.ceil(limit / bucket_width)) - 1)
        counts = np.bincount(k - k.min())
        for i, c in enumerate(counts):
            j = int(k.min()) + i
            buckets.append(ChangeBucket(j * bucket_width, (j + 1) * bucket_width, int(c), False))
    if right:
        buckets.append(ChangeBucket(limit, None, right, True))
    return buckets


def write_histogram_csv(path, buckets):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lower", "upper", "count", "overflow"])
        for b in buckets:
            w.writerow(
                [
                    "" if b.lower is None else f"{b.lower:.2f}",
                    "" if b.upper is None else f"{b.upper:.2f}",
                    b.count,
                    "true" if b.overflow else "false",
                ]
            )


class TierPricer(BaseEstimator, TransformerMixin):
    """Learn tier caps from pooled monthly request counts and price usage.

    ``fit`` computes the caps (unless ``caps`` is given), ``predict`` returns
    tier indices and ``transform`` returns monthly charges in dollars.
    """

    def __init__(self, unit_price=REFERENCE_UNIT_PRICE, breakpoints=DEFAULT_BREAKPOINTS, caps=None):
        self.unit_price = unit_price
        self.breakpoints = breakpoints
        self.caps = caps

    def fit(self, X, y=None):
        if self.caps is not None:
            self.table_ = TierTable.from_caps(self.caps, self.unit_price, self.breakpoints)
        else:
            self.table_ = build_tiers(X, self.unit_price, self.breakpoints)
        self.caps_ = self.table_.caps
        return self

    def predict(self, X):
        check_is_fitted(self, "table_")
        return np.array([self.table_.assign(int(n)).index for n in as_counts(X)], dtype=np.int64)

    def transform(self, X):
        check_is_fitted(self, "table_")
        return np.array([float(self.table_.charge(int(n))) for n in as_counts(X)])
