"""Reading samples and price series, log-returns and positive/negative parts."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .empirics import DEFAULT_MIN_TAIL, Sample
from .errors import InputFormatError


@dataclass(frozen=True)
class PriceSeries:
    prices: tuple
    dates: Optional[tuple] = None

    def __post_init__(self):
        if len(self.prices) < 2:
            raise InputFormatError("a price series needs at least 2 points")
        for i, p in enumerate(self.prices):
            if not (p > 0) or not math.isfinite(p):
                raise InputFormatError(f"price must be positive, got {p}", line=i + 1)
        if self.dates is not None and len(self.dates) != len(self.prices):
            raise InputFormatError("dates and prices differ in length")


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def parse_values(text: str, positive: bool = True) -> np.ndarray:
    """One number per line; blank and ``#`` lines are skipped."""
    out = []
    for lineno, line in _content_lines(text):
        try:
            v = float(line.split(",")[-1] if "," in line else line)
        except ValueError:
            raise InputFormatError(f"not a number: {line!r}", line=lineno) from None
        if not math.isfinite(v):
            raise InputFormatError(f"non-finite value {line!r}", line=lineno)
        if positive and v <= 0:
            raise InputFormatError(f"value must be positive, got {v}", line=lineno)
        out.append(v)
    return np.array(out, dtype=float)


def parse_prices(text: str) -> PriceSeries:
    """``date,price`` rows (or bare prices); a non-numeric first row is a header."""
    dates, prices = [], []
    first = True
    for lineno, line in _content_lines(text):
        row = next(csv.reader(io.StringIO(line)))
        cell = row[-1].strip()
        try:
            p = float(cell)
        except ValueError:
            if first:
                first = False
                continue
            raise InputFormatError(f"not a price: {cell!r}", line=lineno) from None
        first = False
        if not (p > 0) or not math.isfinite(p):
            raise InputFormatError(f"price must be positive, got {cell}", line=lineno)
        prices.append(p)
        dates.append(row[0].strip() if len(row) > 1 else None)
    has_dates = any(d is not None for d in dates)
    return PriceSeries(tuple(prices), tuple(dates) if has_dates else None)


def log_returns(series: PriceSeries) -> np.ndarray:
    p = np.asarray(series.prices, dtype=float)
    return np.diff(np.log(p))


@dataclass(frozen=True)
class Parts:
    positive: Sample
    negative: Sample
    zeros: int


def split_parts(returns: Sequence[float], min_tail: int = DEFAULT_MIN_TAIL) -> Parts:
    """Positive returns, minus the negative returns, and the count of zeros."""
    r = np.asarray(returns, dtype=float)
    parts = Parts(Sample(r[r > 0]), Sample(-r[r < 0]), int(np.count_nonzero(r == 0)))
    for name, part in (("positive", parts.positive), ("negative", parts.negative)):
        if part.n < min_tail:
            warnings.warn(f"{name} part has {part.n} values (< {min_tail}); tests on it are disabled",
                          stacklevel=2)
    return parts
