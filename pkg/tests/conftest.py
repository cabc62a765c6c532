import numpy as np
import pytest

from tierprice.ingestion import LicenseRecord, UsageRecord
from tierprice.months import MonthKey


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def tiny_tables():
    """Three customers over four months, small enough to check by hand."""
    m = MonthKey.parse
    licenses = [
        LicenseRecord("a", 2, m("2016-01"), m("2017-01"), 120.00, "direct"),
        LicenseRecord("b", 1, m("2016-02"), m("2016-08"), 30.00, "partner"),
        LicenseRecord("c", 5, m("2015-06"), m("2016-03"), 90.00, "direct"),
    ]
    usage = [
        UsageRecord("a", m("2016-01"), 100),
        UsageRecord("a", m("2016-02"), 110),
        UsageRecord("b", m("2016-02"), 40),
        UsageRecord("c", m("2016-01"), 500),
        UsageRecord("c", m("2016-02"), 450),
        UsageRecord("a", m("2016-03"), 90),
        UsageRecord("b", m("2016-03"), 35),
        UsageRecord("c", m("2016-03"), 5),
        UsageRecord("a", m("2016-04"), 95),
        UsageRecord("b", m("2016-04"), 30),
    ]
    return licenses, usage


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
