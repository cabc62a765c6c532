"""Augmented Dickey-Fuller and Phillips-Perron unit-root tests.

Both tests regress the first difference on the lagged level,

    dy_t = mu + beta*t + gamma*y_{t-1} [+ sum_i delta_i dy_{t-i}] + e_t,

and test H0: gamma = 0 (unit root) against H1: gamma < 0. The deterministic
part is selected by ``regression``: ``"none"``, ``"drift"`` (intercept) or
``"trend"`` (intercept and linear trend). P-values come from MacKinnon's
(1994) response surfaces; finite-sample critical values from MacKinnon (2010).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import qr, solve_triangular
from scipy.stats import norm

from ._validation import as_1d_float
from .errors import DegenerateSeriesError, InsufficientDataError, SingularMatrixError

SMALL_SAMPLE = 25

_ALIASES = {
    "none": "none", "n": "none", "nc": "none",
    "drift": "drift", "c": "drift",
    "trend": "trend", "ct": "trend",
}

# MacKinnon (1994), one I(1) series. Polynomials in the statistic, lowest
# order first; p = Phi(poly(stat)).
_TAU_MAX = {"none": math.inf, "drift": 2.74, "trend": 0.7}
_TAU_MIN = {"none": -19.04, "drift": -18.83, "trend": -16.18}
_TAU_STAR = {"none": -1.04, "drift": -1.61, "trend": -2.89}
_TAU_SMALLP = {
    "none": (0.6344, 1.2378, 0.032496),
    "drift": (2.1659, 1.4412, 0.038269),
    "trend": (3.2512, 1.6047, 0.049588),
}
_TAU_LARGEP = {
    "none": (0.4797, 0.93557, -0.06999, 0.033066),
    "drift": (1.7339, 0.93202, -0.12745, -0.010368),
    "trend": (2.5261, 0.61654, -0.37956, -0.060285),
}

# MacKinnon (2010): cv(T) = b0 + b1/T + b2/T^2 + b3/T^3 at 1%, 5%, 10%.
_TAU_2010 = {
    "none": (
        (-2.56574, -2.2358, -3.627, 0.0),
        (-1.94100, -0.2686, -3.365, 31.223),
        (-1.61682, 0.2656, -2.714, 25.364),
    ),
    "drift": (
        (-3.43035, -6.5393, -16.786, -79.433),
        (-2.86154, -2.8903, -4.234, -40.040),
        (-2.56677, -1.5384, -2.809, 0.0),
    ),
    "trend": (
        (-3.95877, -9.0531, -28.428, -134.155),
        (-3.41049, -4.3904, -9.036, -45.374),
        (-3.12705, -2.5856, -3.925, -22.380),
    ),
}


def normalize_regression(regression: str) -> str:
    try:
        return _ALIASES[regression]
    except KeyError:
        raise ValueError(
            f"regression must be one of none/drift/trend, got {regression!r}"
        ) from None


def mackinnon_pvalue(stat: float, regression: str = "drift") -> float:
    """Approximate asymptotic p-value of a Dickey-Fuller tau statistic."""
    regression = normalize_regression(regression)
    if stat > _TAU_MAX[regression]:
        return 1.0
    if stat < _TAU_MIN[regression]:
        return 0.0
    coefs = _TAU_SMALLP[regression] if stat <= _TAU_STAR[regression] else _TAU_LARGEP[regression]
    poly = sum(c * stat**i for i, c in enumerate(coefs))
    return float(norm.cdf(poly))


def critical_values(nobs: int, regression: str = "drift") -> dict[str, float]:
    regression = normalize_regression(regression)
    out = {}
    for label, b in zip(("1%", "5%", "10%"), _TAU_2010[regression]):
        out[label] = b[0] + b[1] / nobs + b[2] / nobs**2 + b[3] / nobs**3
    return out


@dataclass(frozen=True)
class UnitRootResult:
    test: str
    statistic: float
    p_value: float
    lags_used: int
    regression: str
    n_effective: int
    small_sample_warning: bool
    critical_values: dict = field(default_factory=dict)

    def reject(self, alpha: float = 0.05) -> bool:
        """True when the unit-root null is rejected at level ``alpha``."""
        return self.p_value < alpha

    def to_dict(self):
        d = asdict(self)
        d["lags"] = d.pop("lags_used")
        return d

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


def _deterministic(nobs, regression):
    cols = []
    if regression in ("drift", "trend"):
        cols.append(np.ones(nobs))
    if regression == "trend":
        cols.append(np.arange(1.0, nobs + 1.0))
    return cols


def dickey_fuller_design(y, lags, regression):
    """Response and regressors of the augmented Dickey-Fuller regression.

    Columns are ``[const?, trend?, y_{t-1}, dy_{t-1}, ..., dy_{t-lags}]``;
    returns ``(dy, X, gamma_column_index)``.
    """
    dy = np.diff(y)
    nobs = dy.size - lags
    resp = dy[lags:]
    cols = _deterministic(nobs, regression)
    gamma_col = len(cols)
    cols.append(y[lags:-1])
    for i in range(1, lags + 1):
        cols.append(dy[lags - i : dy.size - i])
    return resp, np.column_stack(cols), gamma_col


def _ols(X, y):
    """Least squares via QR; returns coefficients, residuals, diag((X'X)^-1)."""
    q, r = qr(X, mode="economic")
    d = np.abs(np.diag(r))
    if d.size == 0 or d.min() <= 1e-10 * d.max():
        raise SingularMatrixError("regressor matrix is singular")
    beta = solve_triangular(r, q.T @ y)
    rinv = solve_triangular(r, np.eye(r.shape[0]))
    xtx_inv_diag = np.sum(rinv**2, axis=1)
    return beta, y - X @ beta, xtx_inv_diag


def _t_ratio(X, resp, col):
    nobs, k = X.shape
    beta, resid, xtx_diag = _ols(X, resp)
    ssr = float(resid @ resid)
    if ssr <= 1e-30 * max(float(resp @ resp), 1e-300):
        raise DegenerateSeriesError("zero residual variance")
    s2 = ssr / (nobs - k)
    se = math.sqrt(s2 * xtx_diag[col])
    return beta[col] / se, se, resid, s2


def default_adf_lags(n: int) -> int:
    return int(math.floor((n - 1) ** (1.0 / 3.0)))


def adf_test(series, lags: int | None = None, regression: str = "drift") -> UnitRootResult:
    """Augmented Dickey-Fuller test.

    Parameters
    ----------
    series : array-like or MonthlySeries
    lags : int, optional
        Number of lagged differences; defaults to ``floor((n-1)**(1/3))``.
    regression : {"none", "drift", "trend"}
        ``"trend"`` includes intercept and linear trend.
    """
    y = as_1d_float(series, name="series")
    regression = normalize_regression(regression)
    n = y.size
    if lags is None:
        lags = default_adf_lags(n)
    if lags < 0:
        raise ValueError("lags must be nonnegative")
    if n < lags + 10:
        raise InsufficientDataError(f"ADF with {lags} lags needs at least {lags + 10} observations, got {n}")
    resp, X, col = dickey_fuller_design(y, lags, regression)
    stat, _, _, _ = _t_ratio(X, resp, col)
    nobs = resp.size
    return UnitRootResult(
        test="adf",
        statistic=float(stat),
        p_value=mackinnon_pvalue(stat, regression),
        lags_used=lags,
        regression=regression,
        n_effective=nobs,
        small_sample_warning=nobs < SMALL_SAMPLE,
        critical_values=critical_values(nobs, regression),
    )


def default_pp_lags(nobs: int) -> int:
    return int(math.floor(4.0 * (nobs / 100.0) ** (2.0 / 9.0)))


def bartlett_long_run_variance(u, lags: int) -> float:
    """Newey-West long-run variance of ``u`` (not demeaned), divisor ``len(u)``."""
    u = np.asarray(u, dtype=float)
    T = u.size
    lrv = float(u @ u) / T
    for j in range(1, lags + 1):
        lrv += 2.0 * (1.0 - j / (lags + 1.0)) * float(u[j:] @ u[:-j]) / T
    return lrv


def pp_test(series, regression: str = "none", lags: int | None = None) -> UnitRootResult:
    """Phillips-Perron test (the Z-tau statistic).

    The OLS t-ratio of the lagged level is corrected for serial correlation
    with a Bartlett-kernel long-run variance; ``lags`` is the kernel
    truncation, by default ``floor(4 (T/100)^(2/9))``.
    """
    y = as_1d_float(series, name="series")
    regression = normalize_regression(regression)
    n = y.size
    if n < 10:
        raise InsufficientDataError(f"PP test needs at least 10 observations, got {n}")
    resp, X, col = dickey_fuller_design(y, 0, regression)
    T, k = X.shape
    if lags is None:
        lags = default_pp_lags(T)
    if lags < 0:
        raise ValueError("lags must be nonnegative")
    t, se, resid, s2 = _t_ratio(X, resp, col)
    gamma0 = s2 * (T - k) / T
    lam2 = bartlett_long_run_variance(resid, lags)
    if lam2 <= 0:
        raise DegenerateSeriesError("nonpositive long-run variance estimate")
    lam = math.sqrt(lam2)
    stat = math.sqrt(gamma0 / lam2) * t - 0.5 * (lam2 - gamma0) / lam * (T * se / math.sqrt(s2))
    return UnitRootResult(
        test="pp",
        statistic=float(stat),
        p_value=mackinnon_pvalue(stat, regression),
        lags_used=lags,
        regression=regression,
        n_effective=T,
        small_sample_warning=T < SMALL_SAMPLE,
        critical_values=critical_values(T, regression),
    )


def decision_text(result: UnitRootResult, alpha: float = 0.05) -> str:
    if result.reject(alpha):
        return (
            f"p = {result.p_value:.5f} < {alpha}: reject the unit-root null; "
            "the series is treated as stationary"
        )
    return (
        f"p = {result.p_value:.5f} >= {alpha}: cannot reject the unit-root null; "
        "the series is treated as nonstationary"
    )
