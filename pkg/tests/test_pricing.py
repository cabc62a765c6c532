from decimal import Decimal

import numpy as np
import pytest

from tierprice import pricing
from tierprice.ingestion import UsageRecord
from tierprice.months import MonthKey


@pytest.fixture
def table():
    return pricing.TierTable.from_caps(pricing.REFERENCE_CAPS, pricing.REFERENCE_UNIT_PRICE)


def test_round_half_up():
    assert pricing.round_cents("10.455") == Decimal("10.46")
    assert pricing.round_cents("10.454999") == Decimal("10.45")
    assert pricing.round_cents(0.125) == Decimal("0.13")


def test_reference_caps_give_cent_rounded_prices(table):
    # 1280 * 0.008168 = 10.45504 rounds half-up to 10.46 (the reference schedule prints 10.45)
    got = [str(t.price) for t in table.tiers[:-1]]
    assert got == ["4.37", "6.98", "10.46", "15.27", "22.58", "37.74", "56.97"]


def test_unrounded_unit_price_reproduces_reference_prices():
    # A unit price just under 0.008168 that displays as 0.008168 at six decimals.
    t = pricing.TierTable.from_caps(pricing.REFERENCE_CAPS, 0.0081678)
    assert tuple(str(x.price) for x in t.tiers[:-1]) == pricing.REFERENCE_PRICES
    assert f"{t.unit_price:.6f}" == "0.008168"


@pytest.mark.parametrize(
    "requests, tier",
    [(0, 1), (535, 1), (536, 2), (855, 2), (6975, 7), (6976, 8), (10**6, 8)],
)
def test_cap_is_inclusive(table, requests, tier):
    assert table.assign(requests).index == tier


def test_metered_charge(table):
    assert table.charge(10000) == Decimal("81.68")
    assert table.charge(6976) == Decimal("56.98")


def test_charge_is_monotone(table):
    charges = [table.charge(n) for n in range(0, 9000, 7)]
    assert all(b >= a for a, b in zip(charges, charges[1:]))


def test_percentile_caps_floor():
    data = np.arange(1, 101)
    # linear-interpolated 25th percentile of 1..100 is 25.75
    assert pricing.percentile_caps(data, (25, 50, 75)) == [25, 50, 75]
    assert pricing.percentile_caps(np.arange(0, 1000, 10), (25,)) == [247]


@pytest.mark.parametrize("bp", [(), (50, 40), (0, 50), (50, 100), tuple(range(5, 100, 10))])
def test_breakpoint_validation(bp):
    with pytest.raises(ValueError):
        pricing.percentile_caps(np.arange(1000), bp)


def test_generalized_tier_count():
    t = pricing.build_tiers(np.arange(1, 1001), 0.01, (10, 20, 30, 40, 50, 60, 70, 80, 90))
    assert len(t.tiers) == 10 and t.tiers[-1].metered


def test_csv_roundtrip(tmp_path, table):
    table.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "index,pct_low,pct_high,cap,price"
    assert lines[1] == "1,0.00,0.25,535,4.37"
    assert lines[-1] == "8,0.85,1.00,,0.008168"
    back = pricing.TierTable.from_csv(tmp_path / "t.csv")
    assert back.caps == table.caps and back.tiers[0].price == table.tiers[0].price


def test_project_invoices(table):
    m = MonthKey(2017, 1)
    usage = [
        UsageRecord("b", m, 500),
        UsageRecord("a", m, 10000),
        UsageRecord("c", m + 1, 3),
    ]
    total, rows = pricing.project_invoices(usage, table, m)
    assert [r.guid for r in rows] == ["a", "b"]
    assert total == Decimal("81.68") + Decimal("4.37")


@pytest.mark.parametrize("row", pricing.REFERENCE_INVOICES)
def test_reference_invoice_pct_changes(row):
    month, actual, projected, _, pct = row
    c = pricing.compare_invoices(Decimal(actual), Decimal(projected), MonthKey.parse(month))
    assert c.pct_change == pytest.approx(pct, abs=0.01)
    assert c.difference == pricing.round_cents(Decimal(actual) - Decimal(projected))


def test_reference_difference_column_flagged():
    flagged = {m: (printed, computed) for m, printed, computed in pricing.reference_invoice_discrepancies()}
    assert flagged["2017-01"] == (Decimal("12735.010"), Decimal("12735.03"))


def test_compare_rejects_zero_actual():
    with pytest.raises(ValueError):
        pricing.compare_invoices(0, 5)


def test_change_distribution_dollars():
    old = np.array([100.0, 100.0, 100.0, 300.0, 50.0, 0.0])
    new = np.array([100.0, 105.0, 125.0, 50.0, 250.0, 100.0])
    b = pricing.change_distribution(old, new, "dollars", 10)
    assert sum(x.count for x in b) == 6
    assert (b[0].lower, b[0].upper, b[0].count, b[0].overflow) == (None, -100.0, 1, True)
    assert (b[-1].lower, b[-1].upper, b[-1].count) == (100.0, None, 1)
    # exactly +100 sits in the top in-range bucket
    assert (b[-2].lower, b[-2].upper, b[-2].count) == (90.0, 100.0, 1)
    inner = [x for x in b if not x.overflow]
    assert all(x.upper == y.lower for x, y in zip(inner, inner[1:]))


def test_change_distribution_all_zero():
    b = pricing.change_distribution([5.0, 6.0], [5.0, 6.0])
    assert len(b) == 1 and b[0].count == 2 and b[0].lower == 0.0


def test_change_distribution_percent_floor():
    b = pricing.change_distribution([10.0, 10.0, 10.0], [0.0, 10.0, 50.0], "percent", 10)
    assert b[0].lower == -100.0 and not b[0].overflow
    assert b[-1].overflow and b[-1].count == 1
    with pytest.raises(ValueError):
        pricing.change_distribution([0.0], [1.0], "percent")


def test_tier_pricer_estimator():
    X = np.arange(1, 2001)
    est = pricing.TierPricer(unit_price=0.01, breakpoints=(50,)).fit(X)
    assert est.caps_ == [1000]
    assert est.predict([1000, 1001]).tolist() == [1, 2]
    assert est.transform([1, 1500]).tolist() == [10.0, 15.0]
