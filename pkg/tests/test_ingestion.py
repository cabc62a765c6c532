from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tierprice import ingestion as ing
from tierprice.errors import DegenerateSeriesError, ParseError
from tierprice.months import MonthKey, month_range

JAN, APR = MonthKey(2016, 1), MonthKey(2016, 4)


def test_aggregates_by_hand(tiny_tables):
    licenses, usage = tiny_tables
    aggs = ing.monthly_aggregates(licenses, usage, (JAN, APR))
    got = [(str(a.month), a.active_licenses, a.invoiced_total, a.request_total) for a in aggs]
    assert got == [
        ("2016-01", 7, 20.0, 600),
        ("2016-02", 8, 25.0, 600),
        ("2016-03", 3, 15.0, 130),
        ("2016-04", 3, 15.0, 125),
    ]
    series = ing.price_per_request_series(aggs)
    np.testing.assert_allclose(series.values, [20 / 600, 25 / 600, 15 / 130, 15 / 125])


def test_expiration_month_is_exclusive(tiny_tables):
    licenses, _ = tiny_tables
    c = licenses[2]
    assert c.is_active(MonthKey(2016, 2)) and not c.is_active(MonthKey(2016, 3))
    assert c.term_months == 9


license_strategy = st.builds(
    lambda guid, users, start, term, amount: ing.LicenseRecord(
        guid, users, MonthKey(2015, 1) + start, MonthKey(2015, 1) + start + term, amount
    ),
    st.sampled_from("abcde"),
    st.integers(0, 50),
    st.integers(0, 30),
    st.integers(0, 12),
    st.integers(0, 100000).map(lambda c: c / 100),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(license_strategy, max_size=25))
def test_active_count_recurrence(records):
    """Active this month = active last month + starts this month - expirations this month."""
    months = month_range(MonthKey(2015, 1), MonthKey(2018, 1))
    for prev, m in zip(months, months[1:]):
        starts = sum(r.end_users for r in records if r.effective == m and r.term_months > 0)
        ends = sum(r.end_users for r in records if r.expiration == m and r.term_months > 0)
        assert ing.active_licenses(records, m) == ing.active_licenses(records, prev) + starts - ends


@settings(max_examples=40, deadline=None)
@given(st.lists(license_strategy, max_size=25))
def test_proration_conserves_invoice(records):
    """Summed over all months, prorated revenue equals the invoiced amounts."""
    months = month_range(MonthKey(2014, 12), MonthKey(2018, 8))
    aggs = ing.monthly_aggregates(records, [], (months[0], months[-1]))
    expected = sum(r.invoiced_amount for r in records if r.term_months > 0)
    assert sum(a.invoiced_total for a in aggs) == pytest.approx(expected, abs=1e-6)


def test_roundtrip(tmp_path, tiny_tables):
    licenses, usage = tiny_tables
    customers = [ing.CustomerInfo("a", "Acme"), ing.CustomerInfo("b", "Bolt, Inc.")]
    ing.write_licenses(tmp_path / ing.SALES_FILE, licenses)
    ing.write_usage(tmp_path / ing.USAGE_FILE, usage)
    ing.write_customers(tmp_path / ing.CUSTOMERS_FILE, customers)
    lic2, use2, cust2 = ing.parse_tables(tmp_path)
    assert lic2 == licenses
    assert use2 == sorted(usage, key=lambda u: (u.customer_guid, u.month))
    assert cust2 == customers

    actuals = {JAN: Decimal("100.10"), APR: Decimal("5.00")}
    ing.write_actual_invoices(tmp_path / ing.ACTUALS_FILE, actuals)
    assert ing.read_actual_invoices(tmp_path / ing.ACTUALS_FILE) == actuals


def test_customers_optional(tmp_path, tiny_tables):
    licenses, usage = tiny_tables
    ing.write_licenses(tmp_path / ing.SALES_FILE, licenses)
    ing.write_usage(tmp_path / ing.USAGE_FILE, usage)
    assert ing.parse_tables(tmp_path)[2] == []


def test_duplicate_usage_rows_sum(tmp_path):
    p = tmp_path / "u.csv"
    p.write_text("customer_guid,month,request_count\nx,2016-01,5\nx,2016-01,7\n")
    assert ing.read_usage(p) == [ing.UsageRecord("x", JAN, 12)]


HEADER = "customer_guid,end_users,effective_date,expiration_date,invoiced_amount,channel\n"


@pytest.mark.parametrize(
    "row, field",
    [
        ("a,2,2016-13,2017-01,10.00,d", "effective_date"),
        ("a,-1,2016-01,2017-01,10.00,d", "end_users"),
        ("a,two,2016-01,2017-01,10.00,d", "end_users"),
        ("a,2,2016-01,2017-02,10.00,d", "expiration_date"),
        ("a,2,2016-05,2016-01,10.00,d", "expiration_date"),
        ("a,2,2016-01,2017-01,10.001,d", "invoiced_amount"),
        ("a,2,2016-01,2017-01,-3,d", "invoiced_amount"),
        (",2,2016-01,2017-01,3,d", "customer_guid"),
        ("a,2,2016-01", "<row>"),
    ],
)
def test_parse_errors_name_line_and_field(tmp_path, row, field):
    p = tmp_path / "sales.csv"
    p.write_text(HEADER + "ok,1,2016-01,2016-12,1.00,d\n" + row + "\n")
    with pytest.raises(ParseError) as exc:
        ing.read_licenses(p)
    assert exc.value.line == 3 and exc.value.field == field
    assert "sales.csv:3" in str(exc.value)


@pytest.mark.parametrize(
    "header, field",
    [
        ("customer_guid,month\n", "request_count"),
        ("customer_guid,month,request_count,extra\n", "extra"),
    ],
)
def test_header_errors(tmp_path, header, field):
    p = tmp_path / "u.csv"
    p.write_text(header)
    with pytest.raises(ParseError) as exc:
        ing.read_usage(p)
    assert exc.value.line == 1 and exc.value.field == field


def test_empty_file_and_missing_file(tmp_path):
    p = tmp_path / "u.csv"
    p.write_text("")
    with pytest.raises(ParseError):
        ing.read_usage(p)
    with pytest.raises(FileNotFoundError):
        ing.read_usage(tmp_path / "missing.csv")


def test_duplicate_customer(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("guid,name\na,x\na,y\n")
    with pytest.raises(ParseError, match="duplicate"):
        ing.read_customers(p)


def test_zero_requests_is_degenerate(tiny_tables):
    licenses, usage = tiny_tables
    aggs = ing.monthly_aggregates(licenses, usage, (JAN, MonthKey(2016, 5)))
    with pytest.raises(DegenerateSeriesError, match="2016-05"):
        ing.price_per_request_series(aggs)


def test_per_customer_views(tiny_tables):
    licenses, _ = tiny_tables
    feb = MonthKey(2016, 2)
    assert ing.licenses_by_customer(licenses, feb) == {"a": 2, "b": 1, "c": 5}
    assert ing.invoiced_by_customer(licenses, feb) == {"a": 10.0, "b": 5.0, "c": 10.0}
