"""Deterministic synthetic warehouse exports for tests and demos.

Customers hold consecutive 12-month licenses and generate seasonal request
volumes proportional to their licensed users. Planted under-reporters are
the first ``under_reporters`` customers: one with no license at all and the
rest with a single license but tens of times the typical volume.
"""

from __future__ import annotations

import math
from decimal import Decimal
from pathlib import Path

import numpy as np

from .ingestion import (
    ACTUALS_FILE,
    CUSTOMERS_FILE,
    SALES_FILE,
    USAGE_FILE,
    CustomerInfo,
    LicenseRecord,
    UsageRecord,
    invoiced_by_customer,
    write_actual_invoices,
    write_customers,
    write_licenses,
    write_usage,
)
from .months import MonthKey

DEFAULT_START = MonthKey(2015, 11)
REQUESTS_PER_USER = 600.0
ANNUAL_RATES = (54.00, 60.00, 66.00)


def _license_count(rng):
    u = rng.random()
    if u < 0.30:
        return 1
    if u < 0.50:
        return 2
    return int(rng.integers(3, 31))


def generate(seed=42, customers=200, months=14, under_reporters=3, holdout=4, start=DEFAULT_START):
    """Build the tables in memory.

    Returns ``(licenses, usage, customers, actuals, planted_guids)``; usage
    covers ``months + holdout`` months from ``start`` and actuals cover the
    ``holdout`` months after the analysis window.
    """
    if customers < under_reporters + 10:
        raise ValueError("need at least 10 clean customers besides the planted ones")
    rng = np.random.default_rng(seed)
    total = months + holdout
    end = start + (total - 1)
    guids = sorted({f"{int(v):016x}" for v in rng.integers(0, 2**63, size=customers * 2)})
    rng.shuffle(guids)
    guids = guids[:customers]

    infos, licenses, usage = [], [], []
    planted = guids[:under_reporters]
    for i, guid in enumerate(guids):
        infos.append(CustomerInfo(guid, f"Practice {i:04d}"))
        is_planted = i < under_reporters
        users = 0 if (is_planted and i == 0) else (1 if is_planted else _license_count(rng))
        rate = ANNUAL_RATES[int(rng.integers(len(ANNUAL_RATES)))]
        late = (not is_planted) and rng.random() < 0.1
        first = start + int(rng.integers(1, months)) if late else start - int(rng.integers(0, 12))
        if users:
            eff = first
            while eff <= end:
                licenses.append(
                    LicenseRecord(guid, users, eff, eff + 12, float(Decimal(f"{users * rate:.2f}")), "eCW")
                )
                eff = eff + 12
        per_user = REQUESTS_PER_USER * math.exp(rng.normal(0.0, 0.25))
        if is_planted:
            per_user = REQUESTS_PER_USER * (40.0 if users == 0 else 30.0) * (1 + 0.2 * i)
        scale = max(users, 1)
        for k in range(total):
            m = start + k
            if m < first:
                continue
            season = 1.0 + 0.08 * math.sin(2 * math.pi * (m.month - 1) / 12.0)
            noise = math.exp(rng.normal(0.0, 0.08))
            usage.append(UsageRecord(guid, m, int(round(scale * per_user * season * noise))))

    usage.sort(key=lambda u: (u.customer_guid, u.month))
    licenses.sort(key=lambda r: (r.customer_guid, r.effective))
    infos.sort(key=lambda c: c.guid)
    actuals = {}
    for k in range(months, total):
        m = start + k
        amt = math.fsum(v for _, v in sorted(invoiced_by_customer(licenses, m).items()))
        actuals[m] = Decimal(f"{amt:.2f}")
    return licenses, usage, infos, actuals, sorted(planted)


def write_fixture(data_dir, **kwargs):
    """Generate and write the four CSV exports; returns the planted guids."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    licenses, usage, infos, actuals, planted = generate(**kwargs)
    write_licenses(data_dir / SALES_FILE, licenses)
    write_usage(data_dir / USAGE_FILE, usage)
    write_customers(data_dir / CUSTOMERS_FILE, infos)
    write_actual_invoices(data_dir / ACTUALS_FILE, actuals)
    return planted
