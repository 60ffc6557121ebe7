"""Finite-sample simulation: critical points, p-values, CV-plot bands, power.

Replicates are generated in fixed-size blocks.  Block ``b`` always draws
from ``rng.child(b)`` and the block size depends only on the sample size,
so a run is a pure function of its configuration whatever the number of
worker threads.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import asymptotics
from .distributions import NULL, Alternative, RandomSource
from .empirics import (
    DEFAULT_MIN_TAIL,
    _check_order,
    batch_cv_curves,
    batch_statistic,
    parse_statistic,
    statistic_label,
)
from .errors import ConfigurationError, InvalidParameterError

DEFAULT_TABLE_REPS = 50_000
DEFAULT_POWER_REPS = 10_000
DEFAULT_BAND_REPS = 2_000
TABLE_FIELDS = ("statistic", "n", "m", "level", "value", "reps", "seed", "mode")
POWER_FIELDS = ("alternative", "statistic", "n", "m", "level", "power", "se", "reps", "seed")

_BLOCK_CELLS = 2_000_000


def block_size(n: int) -> int:
    return max(1, min(2_000, _BLOCK_CELLS // max(n, 1)))


def default_sidedness(statistic: str) -> str:
    return "two-sided" if statistic.strip().lower() in ("cv", "mw", "hw", "su") else "upper"


def _run_blocks(fn, reps: int, n: int, rng: RandomSource, workers: Optional[int]):
    bs = block_size(n)
    jobs = [(b, min(bs, reps - start)) for b, start in enumerate(range(0, reps, bs))]

    def one(job):
        b, size = job
        return fn(size, rng.child(b))

    if workers and workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, jobs))
    else:
        parts = [one(j) for j in jobs]
    return np.concatenate(parts, axis=0)


def simulate_statistic(statistic: str, n: int, reps: int, rng: RandomSource, *,
                       m: Optional[int] = None, min_tail: int = DEFAULT_MIN_TAIL,
                       model: Alternative = NULL, workers: Optional[int] = None) -> np.ndarray:
    """Statistic values over ``reps`` samples of size ``n`` from ``model``, in replicate order."""
    kind, m = parse_statistic(statistic, m)
    if reps < 1 or n < 2:
        raise InvalidParameterError("need reps >= 1 and n >= 2")
    if kind == "tm":
        _check_order(n, m, min_tail)

    def block(size, sub):
        rows = model.draw((size, n), sub)
        rows.sort(axis=1)
        return batch_statistic(rows, kind, m, min_tail)

    return _run_blocks(block, reps, n, rng, workers)


@dataclass
class SimConfig:
    statistic: str
    n: int
    reps: int = DEFAULT_TABLE_REPS
    seed: int = 0
    m: Optional[int] = None
    workers: Optional[int] = None
    min_tail: int = DEFAULT_MIN_TAIL
    null_mean: float = 1.0

    def __post_init__(self):
        kind, self.m = parse_statistic(self.statistic, self.m)
        self.statistic = statistic_label(kind, self.m)
        if self.reps < 100:
            raise InvalidParameterError("tables need at least 100 replicates")


@dataclass
class CriticalRow:
    statistic: str
    n: Optional[int]
    m: Optional[int]
    quantiles: dict
    reps: int
    seed: int
    mode: str = "finite"

    def value(self, level: float) -> float:
        for lv, v in self.quantiles.items():
            if math.isclose(lv, level, abs_tol=1e-9):
                return v
        raise ConfigurationError(
            f"no critical value at level {level} for {self.statistic}, n={self.n}"
        )


@dataclass
class CriticalTable:
    rows: dict = field(default_factory=dict)

    def add(self, row: CriticalRow) -> "CriticalTable":
        self.rows[(row.statistic, row.n if row.mode == "finite" else row.mode)] = row
        return self

    def row(self, statistic: str, n) -> CriticalRow:
        kind, m = parse_statistic(statistic)
        key = (statistic_label(kind, m), n)
        if key not in self.rows:
            raise ConfigurationError(f"critical table has no row for {key[0]}, n={n}")
        return self.rows[key]

    def value(self, statistic: str, n, level: float) -> float:
        return self.row(statistic, n).value(level)

    def records(self) -> list:
        out = []
        for row in self.rows.values():
            for level in sorted(row.quantiles):
                out.append({
                    "statistic": row.statistic, "n": row.n, "m": row.m, "level": level,
                    "value": row.quantiles[level], "reps": row.reps, "seed": row.seed,
                    "mode": row.mode,
                })
        return out

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "CriticalTable":
        table = cls()
        for r in records:
            mode = r.get("mode") or "finite"
            n = None if r["n"] in (None, "") else int(r["n"])
            m = None if r["m"] in (None, "") else int(r["m"])
            key = (r["statistic"], n if mode == "finite" else mode)
            if key not in table.rows:
                table.rows[key] = CriticalRow(r["statistic"], n, m, {}, int(r["reps"]),
                                              int(r["seed"]), mode)
            table.rows[key].quantiles[float(r["level"])] = float(r["value"])
        return table

    def to_csv(self) -> str:
        return _records_to_csv(self.records(), TABLE_FIELDS)

    def to_json(self) -> str:
        return json.dumps({"schema": "cvtail.critical/1", "rows": self.records()},
                          sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CriticalTable":
        return cls.from_records(json.loads(text)["rows"])

    @classmethod
    def from_csv(cls, text: str) -> "CriticalTable":
        return cls.from_records(csv.DictReader(io.StringIO(text)))


def _records_to_csv(records, fields) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    for r in records:
        writer.writerow({k: ("" if r.get(k) is None else r[k]) for k in fields})
    return buf.getvalue()


def simulate_critical_points(config: SimConfig, levels: Sequence[float]) -> CriticalRow:
    """Type-7 quantiles of the statistic over ``config.reps`` exponential samples."""
    levels = [float(x) for x in levels]
    if any(not 0 <= x <= 1 for x in levels):
        raise InvalidParameterError("levels must be probabilities")
    draws = simulate_statistic(config.statistic, config.n, config.reps,
                               RandomSource(config.seed), m=config.m,
                               min_tail=config.min_tail, model=Alternative("exp", config.null_mean),
                               workers=config.workers)
    qs = np.quantile(draws, levels, method="linear")
    return CriticalRow(config.statistic, config.n, config.m,
                       {lv: float(q) for lv, q in zip(levels, qs)}, config.reps, config.seed)


def asymptotic_critical_row(m: int, levels: Sequence[float], reps: int = DEFAULT_TABLE_REPS,
                            seed: int = 0, mode: str = "asymptotic") -> CriticalRow:
    """Critical points from the limiting mixture (simulated) or its chi-square fit."""
    spectrum = asymptotics.spectrum_for_order(m)
    if mode == "asymptotic":
        dist = asymptotics.sample_asymptotic_T(spectrum, reps, RandomSource(seed))
        q = {float(lv): float(dist.quantile(lv)) for lv in levels}
    elif mode == "approximate":
        approx = asymptotics.moment_match(spectrum)
        q = {float(lv): approx.quantile(lv) for lv in levels}
        reps = 0
    else:
        raise InvalidParameterError(f"unknown mode {mode!r}")
    return CriticalRow(f"t{m}", None, m, q, reps, seed, mode)


def empirical_pvalue(observed: float, statistic: str, n: int, m: Optional[int] = None,
                     reps: int = DEFAULT_TABLE_REPS, rng: Optional[RandomSource] = None,
                     sidedness: Optional[str] = None, min_tail: int = DEFAULT_MIN_TAIL,
                     workers: Optional[int] = None) -> float:
    """Add-one Monte Carlo p-value under the unit-exponential null.

    Upper-tail for the multi-threshold statistics, equal-tail two-sided for
    cv, MW and SU unless ``sidedness`` says otherwise.
    """
    kind, m = parse_statistic(statistic, m)
    label = statistic_label(kind, m)
    sidedness = sidedness or default_sidedness(label)
    rng = rng or RandomSource(0)
    draws = simulate_statistic(label, n, reps, rng, m=m, min_tail=min_tail, workers=workers)
    dist = asymptotics.EmpiricalDistribution(draws)
    if sidedness == "upper":
        return dist.upper_pvalue(observed)
    if sidedness == "lower":
        return dist.lower_pvalue(observed)
    if sidedness == "two-sided":
        return dist.two_sided_pvalue(observed)
    raise InvalidParameterError(f"unknown sidedness {sidedness!r}")


@dataclass
class BandTable:
    k: np.ndarray
    tail_count: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    median: np.ndarray
    level: float
    n: int
    reps: int

    def width(self) -> np.ndarray:
        return self.upper - self.lower


def cv_plot_bands(n: int, level: float = 0.9, min_tail: int = DEFAULT_MIN_TAIL,
                  reps: int = DEFAULT_BAND_REPS, rng: Optional[RandomSource] = None,
                  workers: Optional[int] = None) -> BandTable:
    """Pointwise null quantile bands of the CV-plot for samples of size ``n``."""
    if n < min_tail or min_tail < 2:
        raise InvalidParameterError("need n >= min_tail >= 2")
    if reps < 1000:
        raise InvalidParameterError("bands need at least 1000 replicates")
    if not 0 <= level < 1:
        raise InvalidParameterError("band level must be in [0, 1)")
    rng = rng or RandomSource(0)

    def block(size, sub):
        rows = NULL.draw((size, n), sub)
        rows.sort(axis=1)
        return batch_cv_curves(rows, min_tail)

    curves = _run_blocks(block, reps, n, rng, workers)
    lo, med, hi = np.quantile(curves, [(1 - level) / 2, 0.5, (1 + level) / 2], axis=0,
                              method="linear")
    ks = np.arange(n - min_tail + 1)
    return BandTable(ks, n - ks, lo, hi, med, level, n, reps)


@dataclass
class PowerResult:
    alternative: str
    statistic: str
    n: int
    m: Optional[int]
    level: float
    power: float
    se: float
    reps: int
    seed: Optional[int] = None

    def record(self) -> dict:
        return asdict(self)


@dataclass
class PowerTable:
    results: list = field(default_factory=list)

    def add(self, result: PowerResult) -> "PowerTable":
        self.results.append(result)
        return self

    def get(self, alternative: str, statistic: str, n: int) -> PowerResult:
        for r in self.results:
            if (r.alternative, r.statistic, r.n) == (alternative, statistic, n):
                return r
        raise KeyError((alternative, statistic, n))

    def to_csv(self) -> str:
        return _records_to_csv([r.record() for r in self.results], POWER_FIELDS)

    def to_json(self) -> str:
        return json.dumps({"schema": "cvtail.power/1",
                           "rows": [r.record() for r in self.results]},
                          sort_keys=True, indent=2)


def critical_levels_for(statistic: str, level: float) -> list:
    """Quantile levels a critical table needs to run a test at ``level``."""
    if default_sidedness(statistic) == "two-sided":
        return [level / 2, 1 - level / 2]
    return [1 - level]


def power_estimate(alternative: Alternative, statistic: str, n: int, level: float,
                   reps: int, critical: CriticalTable, rng: RandomSource, *,
                   m: Optional[int] = None, min_tail: int = DEFAULT_MIN_TAIL,
                   workers: Optional[int] = None) -> PowerResult:
    """Rejection rate of the level-``level`` test against ``alternative``."""
    kind, m = parse_statistic(statistic, m)
    label = statistic_label(kind, m)
    if reps < 1:
        raise InvalidParameterError("reps must be positive")
    row = critical.row(label, n)
    two_sided = default_sidedness(label) == "two-sided"
    if two_sided:
        lo, hi = row.value(level / 2), row.value(1 - level / 2)
    else:
        hi = row.value(1 - level)
    draws = simulate_statistic(label, n, reps, rng, m=m, min_tail=min_tail,
                               model=alternative, workers=workers)
    reject = draws > hi
    if two_sided:
        reject |= draws < lo
    p = float(reject.mean())
    return PowerResult(alternative.label(), label, n, m, level, p,
                       math.sqrt(p * (1 - p) / reps), reps, rng.seed)
