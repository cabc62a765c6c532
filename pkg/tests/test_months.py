import pytest

from tierprice.months import MonthKey, month_range, parse_window


def test_parse_and_format():
    assert str(MonthKey.parse("2016-03")) == "2016-03"
    assert MonthKey.parse("2016-03-15") == MonthKey(2016, 3)


@pytest.mark.parametrize("bad", ["2016-13", "2016-00", "16-03", "march", ""])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        MonthKey.parse(bad)


def test_arithmetic_crosses_years():
    m = MonthKey(2015, 11)
    assert m + 2 == MonthKey(2016, 1)
    assert MonthKey(2016, 12) - m == 13
    assert (m + 14) - 14 == m
    assert m.succ().pred() == m
    assert MonthKey.from_ordinal(m.ordinal) == m


def test_month_range_inclusive():
    r = month_range(MonthKey(2015, 11), MonthKey(2016, 12))
    assert len(r) == 14 and r[0] == MonthKey(2015, 11) and r[-1] == MonthKey(2016, 12)


def test_parse_window():
    assert parse_window("2015-11..2016-12") == (MonthKey(2015, 11), MonthKey(2016, 12))
    assert parse_window("2015-11:2016-12")[1] == MonthKey(2016, 12)
    with pytest.raises(ValueError):
        parse_window("2016-12..2015-11")
