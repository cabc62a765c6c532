import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tierprice.errors import DegenerateSeriesError, InsufficientDataError
from tierprice.months import MonthKey
from tierprice.timeseries import MonthlySeries, acf, default_max_lag, difference, undifference

START = MonthKey(2015, 11)


def naive_acf(y, k):
    """Textbook loop: common mean, divisor n at every lag."""
    n = len(y)
    mu = sum(y) / n
    c0 = sum((v - mu) ** 2 for v in y) / n
    ck = sum((y[t] - mu) * (y[t + k] - mu) for t in range(n - k)) / n
    return ck / c0


def test_series_is_read_only():
    s = MonthlySeries(START, np.arange(3.0))
    with pytest.raises(ValueError):
        s.values[0] = 1.0
    assert s.end == MonthKey(2016, 1)
    assert s.at(MonthKey(2015, 12)) == 1.0


def test_acf_matches_loop(rng):
    y = rng.normal(size=40)
    res = acf(MonthlySeries(START, y), max_lag=8)
    expected = [naive_acf(list(y), k) for k in range(9)]
    np.testing.assert_allclose(res.coefficients, expected, rtol=1e-12, atol=1e-14)
    assert res.coefficients[0] == 1.0


def test_default_max_lag():
    assert default_max_lag(14) == 11
    assert default_max_lag(200) == 23
    assert default_max_lag(5) == 3


def test_acf_alternating_series():
    y = np.array([1.0, -1.0] * 10)
    assert acf(y, max_lag=1).coefficients[1] == pytest.approx(-0.95, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3), min_size=6, max_size=40),
    st.floats(0.1, 100),
    st.floats(-1e3, 1e3),
)
def test_acf_affine_invariant(values, a, b):
    y = np.array(values)
    if np.std(y) < 1e-6 * (1 + np.abs(y).max()):
        return
    r1 = acf(y).coefficients
    r2 = acf(a * y + b).coefficients
    np.testing.assert_allclose(r1, r2, atol=1e-9)
    assert np.all(np.abs(r1) <= 1 + 1e-12)


def test_acf_degenerate():
    with pytest.raises(DegenerateSeriesError):
        acf(np.ones(10))
    with pytest.raises(InsufficientDataError):
        acf(np.array([1.0, 2.0]))


def test_difference_roundtrip(rng):
    y = MonthlySeries(START, rng.normal(size=14).cumsum())
    d = difference(y, 1)
    assert d.start == START + 1 and len(d) == 13
    back = undifference(d, y.values[0])
    np.testing.assert_allclose(back.values, y.values, atol=1e-12)
    assert len(difference(y, 2)) == 12
    with pytest.raises(InsufficientDataError):
        difference(MonthlySeries(START, np.ones(2)), 2)


def test_series_csv(tmp_path):
    s = MonthlySeries(START, np.array([0.0081234567, 0.5]))
    s.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[1] == "2015-11,0.008123"
