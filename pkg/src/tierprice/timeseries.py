"""Monthly series container, differencing and the sample autocorrelation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import as_1d_float
from .errors import DegenerateSeriesError, InsufficientDataError
from .months import MonthKey


@dataclass(frozen=True)
class MonthlySeries:
    """Gap-free monthly observations; ``values[i]`` belongs to ``start + i``."""

    start: MonthKey
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = as_1d_float(self.values, name="values", min_length=1)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    @property
    def end(self) -> MonthKey:
        return self.start + (len(self) - 1)

    @property
    def months(self) -> list[MonthKey]:
        return [self.start + i for i in range(len(self))]

    def items(self):
        return zip(self.months, self.values.tolist())

    def at(self, month: MonthKey) -> float:
        i = month - self.start
        if not 0 <= i < len(self):
            raise KeyError(str(month))
        return float(self.values[i])

    def slice(self, start: MonthKey, end: MonthKey) -> "MonthlySeries":
        i, j = start - self.start, end - self.start
        if i < 0 or j >= len(self) or j < i:
            raise KeyError(f"{start}..{end} not inside {self.start}..{self.end}")
        return MonthlySeries(start, self.values[i : j + 1])

    def to_csv(self, path, precision=6):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["month", "value"])
            for m, v in self.items():
                w.writerow([str(m), f"{v:.{precision}f}"])


def difference(series: MonthlySeries, d: int = 1) -> MonthlySeries:
    """Apply the first-difference operator ``d`` times.

    The result starts ``d`` months later than the input.
    """
    if d < 0:
        raise ValueError("difference order must be nonnegative")
    if len(series) <= d:
        raise InsufficientDataError(
            f"cannot difference {len(series)} observations {d} times"
        )
    if d == 0:
        return series
    return MonthlySeries(series.start + d, np.diff(series.values, n=d))


def undifference(diffs: MonthlySeries, first_value: float) -> MonthlySeries:
    """Invert one order of differencing given the value preceding ``diffs``."""
    vals = np.concatenate(([first_value], first_value + np.cumsum(diffs.values)))
    return MonthlySeries(diffs.start - 1, vals)


def default_max_lag(n: int) -> int:
    return max(1, min(n - 2, int(math.floor(10 * math.log10(n)))))


@dataclass(frozen=True)
class AcfResult:
    lags: np.ndarray
    coefficients: np.ndarray
    nobs: int

    def confidence_band(self, z=1.96):
        """Half-width of the white-noise band, ``z / sqrt(n)``."""
        return z / math.sqrt(self.nobs)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lag", "coefficient"])
            for k, r in zip(self.lags.tolist(), self.coefficients.tolist()):
                w.writerow([k, f"{r:.6f}"])


def acf(series, max_lag: int | None = None) -> AcfResult:
    """Sample autocorrelation with a common mean and the biased ``n`` divisor.

    r_k = sum_{t<n-k} (y_t - ybar)(y_{t+k} - ybar) / sum_t (y_t - ybar)^2
    """
    y = as_1d_float(series, name="series", min_length=3)
    n = y.size
    if max_lag is None:
        max_lag = default_max_lag(n)
    if max_lag < 1:
        raise ValueError("max_lag must be positive")
    if n < max_lag + 2:
        raise InsufficientDataError(
            f"acf with max_lag={max_lag} needs at least {max_lag + 2} observations"
        )
    dev = y - y.mean()
    denom = float(dev @ dev)
    if denom <= 0.0 or denom <= 1e-28 * float(y @ y):
        raise DegenerateSeriesError("series has zero variance")
    coefs = np.empty(max_lag + 1)
    coefs[0] = 1.0
    for k in range(1, max_lag + 1):
        coefs[k] = float(dev[: n - k] @ dev[k:]) / denom
    return AcfResult(np.arange(max_lag + 1), coefs, n)

