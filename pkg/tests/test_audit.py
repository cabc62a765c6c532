import json
import math

import numpy as np
import pytest

from tierprice import audit
from tierprice.months import MonthKey
from tierprice.pricing import TierTable

DEC = MonthKey(2016, 12)


def population():
    # five 2-license customers around 1000 requests, a few larger ones
    rows = [(f"c{i}", 2, r) for i, r in enumerate([900, 1000, 1100, 950, 1050])]
    rows += [("big1", 10, 5000), ("big2", 20, 9000), ("one", 1, 400)]
    return rows


def test_group_median_baseline():
    pop = [(l, r) for _, l, r in population()]
    assert audit.typical_usage(pop, 2) == 1000.0
    assert audit.typical_usage(pop, 0) == 0.0


def test_small_group_falls_back_to_rate():
    pop = [(l, r) for _, l, r in population()]
    # median of per-license rates: 450,500,550,475,525,500,450,400 -> 487.5
    assert audit.typical_usage(pop, 3) == pytest.approx(3 * 487.5)


def test_flags_zero_license_and_high_usage():
    rows = population() + [("ghost", 0, 300), ("heavy", 2, 6500), ("edge", 2, 6000), ("idle", 0, 0)]
    found = audit.flag_under_reporters(rows, 6.0, DEC)
    by_guid = {f.customer_guid: f for f in found}
    assert set(by_guid) == {"ghost", "heavy"}
    assert by_guid["ghost"].reason == audit.ZERO_LICENSE and math.isinf(by_guid["ghost"].ratio)
    assert by_guid["heavy"].reason == audit.EXCEEDS
    assert found[0].customer_guid == "ghost"
    assert by_guid["ghost"].to_dict()["ratio"] is None


def test_multiplier_validation():
    with pytest.raises(ValueError):
        audit.flag_under_reporters(population(), 1.0)


def test_report_and_streaks(tmp_path, tiny_tables):
    licenses, usage = tiny_tables
    from tierprice.ingestion import UsageRecord

    usage = usage + [UsageRecord("ghost", MonthKey(2016, m), 50) for m in (2, 3)]
    table = TierTable.from_caps([50, 100], 0.5, (30, 60))
    feb = audit.monthly_audit_report(MonthKey(2016, 2), licenses, usage, table, tmp_path)
    audit.write_report(feb, tmp_path)
    mar = audit.monthly_audit_report(MonthKey(2016, 3), licenses, usage, table, tmp_path)
    # c's license lapsed at the start of March but it kept sending requests
    assert [f["customer_guid"] for f in mar["findings"]] == ["c", "ghost"]
    assert mar["streaks"] == [{"customer_guid": "c", "streak": 1}, {"customer_guid": "ghost", "streak": 2}]
    assert sum(t["customers"] for t in mar["tier_census"]) == mar["customers"] == 4
    assert mar["license_census"] == {"0": 2, "1": 1, "2": 1}

    jpath, tpath = audit.write_report(mar, tmp_path)
    assert json.loads(jpath.read_text())["month"] == "2016-03"
    assert "ghost" in tpath.read_text()


def test_report_requires_usage(tiny_tables):
    licenses, usage = tiny_tables
    with pytest.raises(ValueError, match="no usage"):
        audit.monthly_audit_report(MonthKey(2020, 1), licenses, usage)


def test_detector_estimator_matches_function():
    rows = population() + [("ghost", 0, 300), ("heavy", 2, 6500)]
    X = np.array([[l, r] for _, l, r in rows])
    det = audit.UnderReportingDetector(multiplier=6.0).fit(X)
    flagged = {rows[i][0] for i in np.flatnonzero(det.predict(X))}
    assert flagged == {f.customer_guid for f in audit.flag_under_reporters(rows, 6.0)}
    assert det.baseline(2) == 1025.0  # the group includes "heavy"
