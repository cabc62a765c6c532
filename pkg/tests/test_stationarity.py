import json

import numpy as np
import pytest

from tierprice import stationarity as st
from tierprice.errors import InsufficientDataError

from . import oracles


@pytest.fixture
def walk(rng):
    return rng.normal(size=120).cumsum()


@pytest.mark.parametrize("regression", ["none", "drift", "trend"])
@pytest.mark.parametrize("lags", [0, 1, 4])
def test_adf_matches_normal_equations(walk, regression, lags):
    res = st.adf_test(walk, lags=lags, regression=regression)
    assert res.statistic == pytest.approx(oracles.adf_stat(walk, lags, regression), rel=1e-8)
    assert res.n_effective == walk.size - 1 - lags


@pytest.mark.parametrize("regression", ["none", "drift", "trend"])
def test_pp_matches_loop_oracle(walk, regression):
    res = st.pp_test(walk, regression=regression, lags=3)
    assert res.statistic == pytest.approx(oracles.pp_stat(walk, 3, regression), rel=1e-8)


def test_pp_without_correction_is_t_ratio(walk):
    # With no autocovariance lags the long-run and short-run variances agree.
    pp = st.pp_test(walk, regression="drift", lags=0)
    adf = st.adf_test(walk, regression="drift", lags=0)
    assert pp.statistic == pytest.approx(adf.statistic, rel=1e-12)


def test_residuals_orthogonal_to_regressors(walk):
    resp, X, _ = st.dickey_fuller_design(walk, 2, "trend")
    _, resid, _ = st._ols(X, resp)
    scale = np.linalg.norm(X, axis=0) * np.linalg.norm(resid)
    assert np.all(np.abs(X.T @ resid) <= 1e-10 * scale)


@pytest.mark.parametrize("a, b", [(1e-4, 0.0), (250.0, -3.0)])
def test_statistic_scale_invariant(walk, a, b):
    base = st.adf_test(walk, lags=2, regression="drift").statistic
    assert st.adf_test(a * walk + b, lags=2, regression="drift").statistic == pytest.approx(base, rel=1e-9)


def test_default_lag_rules():
    assert st.default_adf_lags(13) == 2
    assert st.default_adf_lags(200) == 5
    assert st.default_pp_lags(12) == 2
    assert st.default_pp_lags(100) == 4


@pytest.mark.parametrize("regression", ["none", "drift", "trend"])
def test_pvalue_monotone_and_bounded(regression):
    stats = np.linspace(-8, 3, 400)
    p = [st.mackinnon_pvalue(s, regression) for s in stats]
    assert np.all(np.diff(p) >= -1e-12)
    assert 0.0 <= p[0] and p[-1] <= 1.0


@pytest.mark.parametrize("regression", ["none", "drift", "trend"])
def test_pvalue_consistent_with_critical_values(regression):
    # asymptotic 5% critical value maps to roughly p = 0.05
    cv = st.critical_values(10**6, regression)["5%"]
    assert st.mackinnon_pvalue(cv, regression) == pytest.approx(0.05, abs=0.005)


def test_decision_rule_at_reference_pvalue():
    r = st.UnitRootResult("adf", -3.3, 0.01688, 2, "drift", 10, True)
    assert r.reject(0.05) and not r.reject(0.01)
    assert st.decision_text(r).startswith("p = 0.01688 < 0.05: reject")


def test_small_sample_flag_and_json(rng):
    res = st.adf_test(rng.normal(size=13), lags=2)
    assert res.small_sample_warning and res.n_effective == 10
    d = json.loads(res.to_json())
    assert set(d) >= {"statistic", "p_value", "lags", "regression", "small_sample_warning"}


def test_short_series_rejected():
    with pytest.raises(InsufficientDataError):
        st.adf_test(np.arange(8.0), lags=1)
    with pytest.raises(InsufficientDataError):
        st.pp_test(np.arange(9.0))


def test_unknown_regression():
    with pytest.raises(ValueError):
        st.adf_test(np.arange(30.0), regression="quadratic")


@pytest.mark.parametrize("regression, sm_reg", [("none", "n"), ("drift", "c"), ("trend", "ct")])
def test_agrees_with_statsmodels(walk, regression, sm_reg):
    sm = pytest.importorskip("statsmodels.tsa.stattools")
    stat, p, *_ = sm.adfuller(walk, maxlag=3, regression=sm_reg, autolag=None)
    res = st.adf_test(walk, lags=3, regression=regression)
    assert res.statistic == pytest.approx(stat, rel=1e-10)
    assert res.p_value == pytest.approx(p, rel=1e-8, abs=1e-12)
