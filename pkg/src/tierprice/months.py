"""Month arithmetic. Months are the only time granularity in the package."""

from __future__ import annotations

import re
from dataclasses import dataclass

_MONTH_RE = re.compile(r"^\s*(\d{4})-(\d{1,2})(?:-(\d{1,2}))?\s*$")


@dataclass(frozen=True, order=True)
class MonthKey:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be in 1..12, got {self.month}")

    @classmethod
    def parse(cls, text: str) -> "MonthKey":
        """Parse ``YYYY-MM``; a trailing ``-DD`` is accepted and dropped."""
        m = _MONTH_RE.match(text)
        if m is None:
            raise ValueError(f"not a YYYY-MM date: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def from_ordinal(cls, n: int) -> "MonthKey":
        y, m = divmod(n, 12)
        return cls(y, m + 1)

    @property
    def ordinal(self) -> int:
        return self.year * 12 + self.month - 1

    def __add__(self, months: int) -> "MonthKey":
        if not isinstance(months, int):
            return NotImplemented
        return MonthKey.from_ordinal(self.ordinal + months)

    def __sub__(self, other):
        if isinstance(other, MonthKey):
            return self.ordinal - other.ordinal
        if isinstance(other, int):
            return MonthKey.from_ordinal(self.ordinal - other)
        return NotImplemented

    def succ(self) -> "MonthKey":
        return self + 1

    def pred(self) -> "MonthKey":
        return self - 1

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def month_range(start: MonthKey, end: MonthKey) -> list[MonthKey]:
    """Inclusive list of months from ``start`` to ``end``."""
    return [start + i for i in range(end - start + 1)]


def parse_window(text: str) -> tuple[MonthKey, MonthKey]:
    """Parse ``YYYY-MM..YYYY-MM`` (a colon separator also works)."""
    sep = ".." if ".." in text else ":"
    lo, _, hi = text.partition(sep)
    start, end = MonthKey.parse(lo), MonthKey.parse(hi)
    if end < start:
        raise ValueError(f"window end {end} precedes start {start}")
    return start, end
