"""Natural cubic smoothing spline with a prior-mean smoothing parameter.

The fit minimizes

    sum_i (y_i - g(x_i))^2 + lam * integral g''(x)^2 dx

over natural cubic splines with the given knots. The spline is parametrized
by its values ``a`` at the knots; the second derivatives at the interior
knots follow from C2 continuity as ``R c = Q' a`` and the roughness penalty is
``a' Q R^-1 Q' a`` (Green and Silverman, 1994, ch. 2).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_1d_float, check_strictly_increasing
from .errors import DomainError, InsufficientDataError, SingularMatrixError

DEFAULT_ALPHA = 10.0
DEFAULT_BETA = 4.7988
DEFAULT_QUANTILES = 8

PUBLISHED_SPLINE_MSE = 1.774695e-7
PUBLISHED_STABLE_PRICE = 0.008168


@dataclass(frozen=True)
class PriorSpec:
    """Inverse-gamma prior on the smoothing parameter (shape ``alpha``, scale ``beta``)."""

    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if not self.alpha > 1:
            raise DomainError(f"inverse-gamma mean is undefined for alpha = {self.alpha} <= 1")
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")

    @property
    def mean(self) -> float:
        return self.beta / (self.alpha - 1.0)


def lambda_from_prior(prior: PriorSpec | None = None, *, alpha=None, beta=None) -> float:
    """Smoothing parameter fixed at the inverse-gamma prior mean, beta / (alpha - 1)."""
    if prior is None:
        prior = PriorSpec(
            DEFAULT_ALPHA if alpha is None else alpha, DEFAULT_BETA if beta is None else beta
        )
    return prior.mean


def select_knots(xs, n_quantiles: int = DEFAULT_QUANTILES) -> np.ndarray:
    """Knots at the ``j / n_quantiles`` sample quantiles of ``xs``, j = 0..n_quantiles.

    Quantiles interpolate linearly between order statistics (Hyndman-Fan
    type 7); coincident knots are merged.
    """
    xs = check_strictly_increasing(as_1d_float(xs, name="xs"), "xs")
    if np.unique(xs).size < 2:
        raise InsufficientDataError("need at least 2 distinct abscissae")
    if n_quantiles < 1:
        raise ValueError("n_quantiles must be positive")
    probs = np.arange(n_quantiles + 1) / n_quantiles
    return np.unique(np.quantile(xs, probs, method="linear"))


def _penalty_parts(knots):
    """Q (K x K-2) and R (K-2 x K-2) of the natural-spline roughness penalty."""
    h = np.diff(knots)
    K = knots.size
    Q = np.zeros((K, K - 2))
    R = np.zeros((K - 2, K - 2))
    for j in range(1, K - 1):
        c = j - 1
        Q[j - 1, c] = 1.0 / h[j - 1]
        Q[j, c] = -1.0 / h[j - 1] - 1.0 / h[j]
        Q[j + 1, c] = 1.0 / h[j]
        R[c, c] = (h[j - 1] + h[j]) / 3.0
        if c + 1 < K - 2:
            R[c, c + 1] = R[c + 1, c] = h[j] / 6.0
    return Q, R


def second_derivative_map(knots) -> np.ndarray:
    """K x K matrix taking knot values to knot second derivatives (zero at the ends)."""
    K = knots.size
    G = np.zeros((K, K))
    if K > 2:
        Q, R = _penalty_parts(knots)
        G[1:-1, :] = solve(R, Q.T, assume_a="pos")
    return G


def penalty_matrix(knots) -> np.ndarray:
    """Omega with integral g''^2 = a' Omega a for the natural spline through ``a``."""
    K = knots.size
    if K <= 2:
        return np.zeros((K, K))
    Q, R = _penalty_parts(knots)
    return Q @ solve(R, Q.T, assume_a="pos")


def _locate(knots, x):
    j = np.searchsorted(knots, x, side="right") - 1
    return np.clip(j, 0, knots.size - 2)


def _value_weights(knots, x):
    """Weights on knot values (L) and knot second derivatives (C) giving g(x)."""
    x = np.asarray(x, dtype=float)
    n, K = x.size, knots.size
    j = _locate(knots, x)
    lo, hi = knots[j], knots[j + 1]
    h = hi - lo
    u, v = x - lo, hi - x
    L = np.zeros((n, K))
    C = np.zeros((n, K))
    rows = np.arange(n)
    L[rows, j] = v / h
    L[rows, j + 1] = u / h
    C[rows, j] = -u * v * (1.0 + v / h) / 6.0
    C[rows, j + 1] = -u * v * (1.0 + u / h) / 6.0
    return L, C


def basis_matrix(knots, x) -> np.ndarray:
    """n x K matrix N with g(x) = N a for the natural spline through knot values ``a``."""
    L, C = _value_weights(knots, x)
    return L + C @ second_derivative_map(knots)


@dataclass(frozen=True)
class SplineFit:
    """Fitted natural cubic spline.

    ``segments[i]`` holds ``(cubic, quadratic, linear, constant)`` coefficients
    of the piece on ``[knots[i], knots[i+1]]`` in the local variable
    ``x - knots[i]``.
    """

    knots: np.ndarray
    knot_values: np.ndarray
    knot_second_derivs: np.ndarray
    segments: np.ndarray
    lam: float
    xs: np.ndarray = field(repr=False)
    fitted: np.ndarray = field(repr=False)

    def predict(self, x):
        """Evaluate the spline; raises ``DomainError`` outside the knot span."""
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        span = self.knots[-1] - self.knots[0]
        tol = 1e-12 * max(span, 1.0)
        if np.any(x < self.knots[0] - tol) or np.any(x > self.knots[-1] + tol):
            raise DomainError(
                f"spline is defined on [{self.knots[0]}, {self.knots[-1]}]; no extrapolation"
            )
        out = self.evaluate_segment(_locate(self.knots, x), x)
        return float(out[0]) if scalar else out

    def evaluate_segment(self, seg, x, deriv=0):
        """Evaluate piece(s) ``seg`` (or a derivative) at ``x`` without domain checks."""
        seg = np.asarray(seg)
        t = np.asarray(x, dtype=float) - self.knots[seg]
        d3, d2, d1, d0 = (self.segments[seg, k] for k in range(4))
        if deriv == 0:
            return ((d3 * t + d2) * t + d1) * t + d0
        if deriv == 1:
            return (3 * d3 * t + 2 * d2) * t + d1
        if deriv == 2:
            return 6 * d3 * t + 2 * d2
        if deriv == 3:
            return 6 * d3 * np.ones_like(t)
        raise ValueError("deriv must be 0..3")

    def derivative(self, x, order=1):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.evaluate_segment(_locate(self.knots, x), x, deriv=order)

    def roughness(self) -> float:
        """Integral of g''^2, exact: g'' is linear on every piece."""
        c = self.knot_second_derivs
        h = np.diff(self.knots)
        return float(np.sum(h * (c[:-1] ** 2 + c[:-1] * c[1:] + c[1:] ** 2) / 3.0))

    def objective(self, ys) -> float:
        ys = as_1d_float(ys, name="ys")
        r = ys - self.fitted
        return float(r @ r) + self.lam * self.roughness()


def _segments(knots, a, c):
    h = np.diff(knots)
    d3 = (c[1:] - c[:-1]) / (6.0 * h)
    d2 = c[:-1] / 2.0
    d1 = (a[1:] - a[:-1]) / h - h * (2.0 * c[:-1] + c[1:]) / 6.0
    return np.column_stack([d3, d2, d1, a[:-1]])


def fit_spline(xs, ys, lam: float, knots=None) -> SplineFit:
    """Penalized least-squares natural cubic spline on ``knots``.

    Solves ``(N'N + lam * Omega) a = N'y`` by Cholesky. ``knots`` default to
    the data abscissae and must span exactly ``[min xs, max xs]``.
    """
    xs = check_strictly_increasing(as_1d_float(xs, name="xs", min_length=2), "xs")
    ys = as_1d_float(ys, name="ys")
    if ys.size != xs.size:
        raise ValueError("xs and ys differ in length")
    if not lam >= 0 or not np.isfinite(lam):
        raise SingularMatrixError(f"smoothing parameter must be a finite value >= 0, got {lam}")
    knots = xs.copy() if knots is None else as_1d_float(knots, name="knots", min_length=2)
    if np.any(np.diff(knots) <= 0):
        raise SingularMatrixError("knots must be strictly increasing (duplicate knot)")
    tol = 1e-12 * max(xs[-1] - xs[0], 1.0)
    if knots[0] < xs[0] - tol or knots[-1] > xs[-1] + tol:
        raise ValueError("knots must lie within [min xs, max xs]")
    if xs[0] < knots[0] - tol or xs[-1] > knots[-1] + tol:
        raise ValueError("knots must span the data: first and last knot at min and max of xs")

    N = basis_matrix(knots, xs)
    a = _solve_penalized(N, ys, penalty_matrix(knots), knots, lam)
    c = second_derivative_map(knots) @ a
    return SplineFit(
        knots=knots,
        knot_values=a,
        knot_second_derivs=c,
        segments=_segments(knots, a, c),
        lam=float(lam),
        xs=xs,
        fitted=N @ a,
    )


def _null_space_rotation(knots):
    """Orthogonal K x K matrix whose first two columns span the linear functions."""
    lin = np.column_stack([np.ones_like(knots), knots - knots.mean()])
    q, _ = np.linalg.qr(lin, mode="complete")
    return q


def _solve_penalized(N, ys, omega, knots, lam):
    """Solve ``(N'N + lam*Omega) a = N'y``.

    The system is rotated so the penalty's null space (linear functions) is
    an explicit block whose penalty is exactly zero, then diagonally
    equilibrated before the Cholesky factorization. This keeps the solution
    accurate for very large ``lam``.
    """
    T = _null_space_rotation(knots)
    NT = N @ T
    M = NT.T @ NT
    if lam > 0 and knots.size > 2:
        B1 = T[:, 2:]
        P = B1.T @ omega @ B1
        M[2:, 2:] += lam * 0.5 * (P + P.T)
    rhs = NT.T @ ys
    diag = np.diag(M)
    if np.any(diag <= 0):
        raise SingularMatrixError(
            "penalized normal equations are singular (too few data per knot for this lambda)"
        )
    d = 1.0 / np.sqrt(diag)
    try:
        beta = d * cho_solve(cho_factor(d[:, None] * M * d[None, :], lower=True), d * rhs)
    except LinAlgError:
        raise SingularMatrixError(
            "penalized normal equations are singular (too few data per knot for this lambda)"
        ) from None
    return T @ beta


def spline_mse(fit: SplineFit, xs, ys) -> float:
    ys = as_1d_float(ys, name="ys")
    r = ys - np.atleast_1d(fit.predict(as_1d_float(xs, name="xs")))
    return float(np.mean(r**2))


def stable_price(fit: SplineFit) -> float:
    """Median fitted value; the midpoint of the central pair for even lengths."""
    if fit.fitted.size == 0:
        raise ValueError("no fitted values")
    return float(np.median(fit.fitted))


def write_spline_outputs(csv_path, json_path, fit: SplineFit, ys, precision=6):
    """Write ``(x, fitted)`` rows and a JSON summary of the fit."""
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "fitted"])
        for x, f in zip(fit.xs.tolist(), fit.fitted.tolist()):
            w.writerow([f"{x:g}", f"{f:.{precision + 4}f}"])
    meta = {
        "lambda": fit.lam,
        "knots": fit.knots.tolist(),
        "mse": spline_mse(fit, fit.xs, ys),
        "median": stable_price(fit),
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


class SmoothingSpline(BaseEstimator, RegressorMixin):
    """Natural cubic smoothing spline regressor.

    Parameters
    ----------
    lam : float or None
        Smoothing parameter. ``None`` uses the inverse-gamma prior mean
        ``prior_beta / (prior_alpha - 1)``.
    prior_alpha, prior_beta : float
    knots : {"quantile", "data"} or array-like
        ``"quantile"`` places knots at the sample quantiles of X.
    n_quantiles : int
        Number of quantile intervals; knots are the ``n_quantiles + 1`` boundaries.
    """

    def __init__(
        self,
        lam=None,
        prior_alpha=DEFAULT_ALPHA,
        prior_beta=DEFAULT_BETA,
        knots="quantile",
        n_quantiles=DEFAULT_QUANTILES,
    ):
        self.lam = lam
        self.prior_alpha = prior_alpha
        self.prior_beta = prior_beta
        self.knots = knots
        self.n_quantiles = n_quantiles

    def fit(self, X, y):
        x = as_1d_float(X, name="X", min_length=2)
        y = as_1d_float(y, name="y")
        if x.size != y.size:
            raise ValueError("X and y differ in length")
        order = np.argsort(x, kind="stable")
        x, y = x[order], y[order]
        lam = (
            lambda_from_prior(PriorSpec(self.prior_alpha, self.prior_beta))
            if self.lam is None
            else float(self.lam)
        )
        if isinstance(self.knots, str):
            if self.knots == "quantile":
                knots = select_knots(x, self.n_quantiles)
            elif self.knots == "data":
                knots = x
            else:
                raise ValueError(f"unknown knot rule {self.knots!r}")
        else:
            knots = self.knots
        self.fit_ = fit_spline(x, y, lam, knots)
        self.lam_ = lam
        self.knots_ = self.fit_.knots
        self.stable_price_ = stable_price(self.fit_)
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        return np.atleast_1d(self.fit_.predict(as_1d_float(X, name="X")))
