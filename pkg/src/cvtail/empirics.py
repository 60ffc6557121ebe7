"""Order statistics, residual coefficients of variation and test statistics.

Every statistic here is scale-free: multiplying a sample by a positive
constant leaves it unchanged up to rounding.  Exceedance over a threshold
``t`` is strict (``x > t``) and spreads use the divide-by-count form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import (
    DegenerateSampleError,
    InsufficientTailError,
    InvalidParameterError,
)

DEFAULT_MIN_TAIL = 20
MAX_ORDER = 32

P_METHODS = ("monte-carlo", "asymptotic-sim", "chi2-approx")


class Sample:
    """Ascending-sorted, immutable collection of positive observations.

    ``order_stat(k)`` is 1-based with ``order_stat(0) == 0``.
    """

    __slots__ = ("_values",)

    def __init__(self, values: Iterable[float]):
        arr = np.array(values, dtype=float).ravel()
        if arr.size and not np.all(np.isfinite(arr)):
            raise InvalidParameterError("sample contains non-finite values")
        if arr.size and arr.min() <= 0:
            raise InvalidParameterError("sample values must be strictly positive")
        arr.sort()
        arr.flags.writeable = False
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n(self) -> int:
        return int(self._values.size)

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Sample(n={self.n})"

    def order_stat(self, k: int) -> float:
        if not 0 <= k <= self.n:
            raise IndexError(f"order statistic {k} out of range 0..{self.n}")
        return 0.0 if k == 0 else float(self._values[k - 1])

    def exceedances(self, t: float) -> np.ndarray:
        return self._values[np.searchsorted(self._values, t, side="right"):]

    def tail_count(self, t: float) -> int:
        return self.n - int(np.searchsorted(self._values, t, side="right"))

    def scaled(self, factor: float) -> "Sample":
        if not factor > 0:
            raise InvalidParameterError("scale factor must be positive")
        return Sample(self._values * factor)

    def largest(self, k: Optional[int]) -> "Sample":
        """The ``k`` largest values (the whole sample when k is None)."""
        if k is None or k >= self.n:
            return self
        if k < 1:
            raise InvalidParameterError("--largest must be at least 1")
        return Sample(self._values[self.n - k:])


@dataclass(frozen=True)
class ThresholdGrid:
    thresholds: tuple
    tail_counts: tuple

    def __post_init__(self):
        if len(self.thresholds) != len(self.tail_counts) or not self.thresholds:
            raise InvalidParameterError("thresholds and tail counts must be non-empty and aligned")
        if any(b < a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise InvalidParameterError("thresholds must be ascending")
        if any(b > a for a, b in zip(self.tail_counts, self.tail_counts[1:])):
            raise InvalidParameterError("tail counts must be non-increasing")
        if self.tail_counts[-1] < 2:
            raise InsufficientTailError("every threshold needs at least two exceedances")

    @property
    def m(self) -> int:
        return len(self.thresholds) - 1


@dataclass
class CvCurve:
    """The CV-plot: one entry per order-statistic threshold.

    ``band_lo``/``band_hi`` hold pointwise null quantiles at ``band_level``
    once attached with :meth:`with_bands`.
    """

    k: np.ndarray
    threshold: np.ndarray
    tail_count: np.ndarray
    cv: np.ndarray
    min_tail: int = DEFAULT_MIN_TAIL
    band_lo: Optional[np.ndarray] = None
    band_hi: Optional[np.ndarray] = None
    band_level: Optional[float] = None

    def __len__(self):
        return int(self.k.size)

    def with_bands(self, bands) -> "CvCurve":
        """Attach a band table from ``montecarlo.cv_plot_bands`` (same n, min_tail)."""
        if len(bands.k) != len(self.k) or np.any(bands.k != self.k):
            raise InvalidParameterError("band table does not match the curve's index range")
        self.band_lo = np.asarray(bands.lower)
        self.band_hi = np.asarray(bands.upper)
        self.band_level = bands.level
        return self

    def fraction_inside(self) -> float:
        self._need_bands()
        inside = (self.cv >= self.band_lo) & (self.cv <= self.band_hi)
        return float(inside.mean())

    def fraction_above(self) -> float:
        self._need_bands()
        return float((self.cv > self.band_hi).mean())

    def _need_bands(self):
        if self.band_lo is None:
            raise InvalidParameterError("curve has no bands attached")

    def rows(self):
        for i in range(len(self)):
            yield (
                int(self.k[i]),
                float(self.threshold[i]),
                int(self.tail_count[i]),
                float(self.cv[i]),
                None if self.band_lo is None else float(self.band_lo[i]),
                None if self.band_hi is None else float(self.band_hi[i]),
            )


@dataclass
class TestReport:
    statistic: str
    value: float
    n: int
    m: Optional[int] = None
    p_value: Optional[float] = None
    p_method: Optional[str] = None
    cvs: Optional[list] = None
    thresholds: Optional[list] = None
    notes: list = field(default_factory=list)

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if (self.p_value is None) != (self.p_method is None):
            raise InvalidParameterError("p_value and p_method go together")
        if self.p_method is not None and self.p_method not in P_METHODS:
            raise InvalidParameterError(f"unknown p-value method {self.p_method!r}")
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise InvalidParameterError("p-value outside [0, 1]")
        if self.cvs is not None and self.m is not None and len(self.cvs) != self.m + 1:
            raise InvalidParameterError("per-threshold cv list must have m+1 entries")

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "value": self.value,
            "n": self.n,
            "m": self.m,
            "p_value": self.p_value,
            "p_method": self.p_method,
            "cvs": self.cvs,
            "thresholds": self.thresholds,
            "notes": list(self.notes),
        }


def _as_sample(sample) -> Sample:
    return sample if isinstance(sample, Sample) else Sample(sample)


def residual_cv(sample, t: float) -> float:
    """Empirical CV of the excesses ``X - t`` over the strict exceedances of ``t``."""
    sample = _as_sample(sample)
    exc = sample.exceedances(t)
    if exc.size < 2:
        raise InsufficientTailError(f"need at least 2 exceedances of t={t}, found {exc.size}")
    excess = exc - t
    return float(excess.std() / excess.mean())


def _suffix_moments(values: np.ndarray):
    """Welford mean and sum of squared deviations of the top-c values, c = 0..n."""
    n = values.size
    mean = np.zeros(n + 1)
    m2 = np.zeros(n + 1)
    mu = 0.0
    s = 0.0
    for c, x in enumerate(values[::-1].tolist(), start=1):
        d = x - mu
        mu += d / c
        s += d * (x - mu)
        mean[c] = mu
        m2[c] = s
    return mean, m2


def cv_curve(sample, min_tail: int = DEFAULT_MIN_TAIL) -> CvCurve:
    """Residual CV at every order statistic ``x_(k)``, ``k = 0..n - min_tail``."""
    sample = _as_sample(sample)
    n = sample.n
    if min_tail < 2:
        raise InvalidParameterError("min_tail must be at least 2")
    if n < min_tail:
        raise InsufficientTailError(f"sample of size {n} is smaller than min_tail={min_tail}")
    vals = sample.values
    ks = np.arange(0, n - min_tail + 1)
    thr = np.concatenate(([0.0], vals[: n - min_tail]))
    counts = n - np.searchsorted(vals, thr, side="right")
    if counts.min() < 2:
        bad = int(ks[np.argmax(counts < 2)])
        raise InsufficientTailError(f"fewer than 2 strict exceedances at k={bad} (tied values)")
    mean, m2 = _suffix_moments(vals)
    cv = np.sqrt(m2[counts] / counts) / (mean[counts] - thr)
    return CvCurve(k=ks, threshold=thr, tail_count=counts, cv=cv, min_tail=min_tail)


def max_feasible_m(n: int, min_tail: int = DEFAULT_MIN_TAIL) -> int:
    """Largest m with floor(n / 2^m) >= min_tail, or -1 if even m=0 fails."""
    if n < min_tail:
        return -1
    m = 0
    while m < MAX_ORDER and (n >> (m + 1)) >= min_tail:
        m += 1
    return m


def _check_order(n: int, m: int, min_tail: int):
    if int(m) != m or not 0 <= m <= MAX_ORDER:
        raise InvalidParameterError(f"m must be an integer in 0..{MAX_ORDER}")
    if min_tail < 2:
        raise InvalidParameterError("min_tail must be at least 2")
    if (n >> m) < min_tail:
        best = max_feasible_m(n, min_tail)
        raise InsufficientTailError(
            f"m={m} leaves {n >> m} observations in the last tail (< min_tail={min_tail}); "
            f"maximal feasible m for n={n} is {best}",
            max_feasible_m=best,
        )


def dyadic_thresholds(sample, m: int, min_tail: int = DEFAULT_MIN_TAIL) -> ThresholdGrid:
    """Thresholds ``x_(n - floor(n/2^k))``, k = 0..m, leaving halving tails."""
    sample = _as_sample(sample)
    n = sample.n
    _check_order(n, m, min_tail)
    counts = tuple(n >> k for k in range(m + 1))
    thr = tuple(sample.order_stat(n - c) for c in counts)
    return ThresholdGrid(thr, counts)


def statistic_T_general(sample, grid: ThresholdGrid) -> float:
    """``sum_k n(t_k) (cv(t_k) - 1)^2`` with exact strict exceedance counts."""
    sample = _as_sample(sample)
    total = 0.0
    for t in grid.thresholds:
        total += sample.tail_count(t) * (residual_cv(sample, t) - 1.0) ** 2
    return total


def statistic_T_m(sample, m: int, min_tail: int = DEFAULT_MIN_TAIL):
    """Dyadic multi-threshold statistic ``n sum_k 2^-k (cv(q_k) - 1)^2``.

    Returns ``(value, cvs)`` where ``cvs[k]`` is the residual CV at ``q_k``.
    """
    sample = _as_sample(sample)
    grid = dyadic_thresholds(sample, m, min_tail)
    cvs = [residual_cv(sample, t) for t in grid.thresholds]
    n = sample.n
    value = n * sum(2.0**-k * (c - 1.0) ** 2 for k, c in enumerate(cvs))
    return value, cvs


def _need(sample, k):
    sample = _as_sample(sample)
    if sample.n < k:
        raise InvalidParameterError(f"need at least {k} observations, got {sample.n}")
    return sample


def statistic_cv(sample) -> float:
    """Plain coefficient of variation, divide-by-n standard deviation over mean."""
    x = _need(sample, 2).values
    return float(x.std() / x.mean())


def _median_sorted(x: np.ndarray) -> float:
    n = x.size
    h = n // 2
    return float(x[h]) if n % 2 else 0.5 * float(x[h - 1] + x[h])


def statistic_mw(sample) -> float:
    """Maximum over median."""
    x = _need(sample, 2).values
    return float(x[-1] / _median_sorted(x))


def statistic_su(sample) -> float:
    """Standard deviation over mean absolute deviation from the median."""
    x = _need(sample, 2).values
    mad = np.abs(x - _median_sorted(x)).mean()
    if mad == 0:
        raise DegenerateSampleError("all values equal the median; SU is undefined")
    return float(x.std() / mad)


# statistic identifiers: "cv", "mw", "su" and "t0", "t1", ... ("tm" + m)


def parse_statistic(name: str, m: Optional[int] = None):
    """Normalize a statistic name into ``(kind, m)``; kind in tm/cv/mw/su."""
    key = name.strip().lower()
    if key in ("hw",):
        key = "mw"
    if key in ("cv", "mw", "su"):
        return key, None
    if key == "tm":
        if m is None:
            raise InvalidParameterError("statistic 'tm' needs an order m")
        return "tm", int(m)
    if key.startswith("t") and key[1:].isdigit():
        mm = int(key[1:])
        if m is not None and int(m) != mm:
            raise InvalidParameterError(f"{name} conflicts with m={m}")
        return "tm", mm
    raise InvalidParameterError(f"unknown statistic {name!r}")


def statistic_label(kind: str, m: Optional[int]) -> str:
    return f"t{m}" if kind == "tm" else kind


def compute_statistic(sample, name: str, m: Optional[int] = None, min_tail: int = DEFAULT_MIN_TAIL):
    kind, m = parse_statistic(name, m)
    if kind == "tm":
        return statistic_T_m(sample, m, min_tail)[0]
    return {"cv": statistic_cv, "mw": statistic_mw, "su": statistic_su}[kind](sample)


# ---------------------------------------------------------------------------
# Batch kernels over rows of an ascending-sorted (reps, n) matrix.  They agree
# with the single-sample functions whenever a row has no ties.


def batch_statistic(rows: np.ndarray, name: str, m: Optional[int] = None,
                    min_tail: int = DEFAULT_MIN_TAIL) -> np.ndarray:
    kind, m = parse_statistic(name, m)
    n = rows.shape[1]
    if kind == "cv":
        return rows.std(axis=1) / rows.mean(axis=1)
    h = n // 2
    med = rows[:, h] if n % 2 else 0.5 * (rows[:, h - 1] + rows[:, h])
    if kind == "mw":
        return rows[:, -1] / med
    if kind == "su":
        return rows.std(axis=1) / np.abs(rows - med[:, None]).mean(axis=1)
    _check_order(n, m, min_tail)
    total = np.zeros(rows.shape[0])
    for k in range(m + 1):
        c = n >> k
        t = rows[:, n - c - 1] if c < n else 0.0
        excess = rows[:, n - c:] - (t[:, None] if c < n else 0.0)
        cv = excess.std(axis=1) / excess.mean(axis=1)
        total += 2.0**-k * (cv - 1.0) ** 2
    return n * total


def batch_residual_cv(rows: np.ndarray, counts) -> np.ndarray:
    """Residual CV at the thresholds leaving ``counts`` top values, per row."""
    n = rows.shape[1]
    out = np.empty((rows.shape[0], len(counts)))
    for j, c in enumerate(counts):
        t = rows[:, n - c - 1][:, None] if c < n else 0.0
        excess = rows[:, n - c:] - t
        out[:, j] = excess.std(axis=1) / excess.mean(axis=1)
    return out


def batch_cv_curves(rows: np.ndarray, min_tail: int = DEFAULT_MIN_TAIL) -> np.ndarray:
    """CV-plot values for each row: column k holds cv(x_(k)), k = 0..n-min_tail."""
    reps, n = rows.shape
    kmax = n - min_tail
    out = np.empty((reps, kmax + 1))
    mean = np.zeros(reps)
    m2 = np.zeros(reps)
    for c in range(1, n + 1):
        x = rows[:, n - c]
        d = x - mean
        mean += d / c
        m2 += d * (x - mean)
        k = n - c
        if k <= kmax:
            t = rows[:, k - 1] if k > 0 else 0.0
            out[:, k] = np.sqrt(m2 / c) / (mean - t)
    return out
