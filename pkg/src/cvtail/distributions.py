"""Random sources, samplers and closed-form quantities for the exponential
null and its heavy-tailed alternatives (GPD / Pareto and absolute Student-t).

Samplers come in two flavours: ``draw_*`` functions return raw ``ndarray``
draws of any shape (used by the Monte Carlo engine), and ``sample_*``
functions wrap a 1-d draw into a validated :class:`~cvtail.empirics.Sample`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InfiniteVarianceError,
    InvalidParameterError,
    UnsupportedAlternativeError,
)

XI_ZERO_TOL = 1e-10

_UINT64 = (1 << 64) - 1


class RandomSource:
    """Reproducible stream of random numbers keyed by ``(seed, stream)``.

    The underlying bit generator is PCG64 seeded through ``SeedSequence``
    with the stream id as spawn key, so distinct streams are independent
    and the same pair always reproduces the same sequence.  A source is
    single-consumer; parallel callers take ``child(i)`` sources instead of
    sharing one.
    """

    def __init__(self, seed: int, stream: int = 0, _path: tuple = ()):
        if not (0 <= int(seed) <= _UINT64) or not (0 <= int(stream) <= _UINT64):
            raise InvalidParameterError("seed and stream must be 64-bit unsigned integers")
        self.seed = int(seed)
        self.stream = int(stream)
        self._path = tuple(_path)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *self._path))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RandomSource":
        """Independent sub-stream, a pure function of (seed, stream, index)."""
        return RandomSource(self.seed, self.stream, (*self._path, int(index)))

    def uniform(self, size) -> np.ndarray:
        """Uniform draws on [0, 1)."""
        return self.generator.random(size)

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, stream={self.stream}, path={self._path})"


@dataclass(frozen=True)
class GpdParams:
    xi: float
    beta: float = 1.0

    def __post_init__(self):
        if not (self.beta > 0) or not math.isfinite(self.beta):
            raise InvalidParameterError(f"GPD scale must be positive, got {self.beta}")
        if not math.isfinite(self.xi):
            raise InvalidParameterError(f"GPD shape must be finite, got {self.xi}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if abs(self.xi) < XI_ZERO_TOL:
            out = -np.expm1(-np.maximum(x, 0.0) / self.beta)
        else:
            z = 1.0 + self.xi * np.maximum(x, 0.0) / self.beta
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(z > 0, -np.expm1(-np.log(np.where(z > 0, z, 1.0)) / self.xi), 1.0)
        return np.where(x <= 0, 0.0, out)

    def sf(self, x):
        return 1.0 - self.cdf(x)


@dataclass(frozen=True)
class StudentParams:
    nu: float

    def __post_init__(self):
        if not (self.nu > 0) or not math.isfinite(self.nu):
            raise InvalidParameterError(f"degrees of freedom must be positive, got {self.nu}")

    @property
    def tail_index(self) -> float:
        return self.nu

    def abs_cdf(self, x):
        """CDF of |T|, T ~ t_nu, through the regularized incomplete beta."""
        from scipy.special import betainc

        x = np.asarray(x, dtype=float)
        xx = np.maximum(x, 0.0)
        # P(|T| > x) = I_{nu/(nu+x^2)}(nu/2, 1/2)
        tail = betainc(self.nu / 2.0, 0.5, self.nu / (self.nu + xx * xx))
        return np.where(x <= 0, 0.0, 1.0 - tail)


def _check_count(n):
    if int(n) != n or n < 1:
        raise InvalidParameterError(f"sample size must be a positive integer, got {n}")


def exponential_from_uniform(u, mu: float = 1.0):
    """Inverse CDF of the exponential with mean ``mu`` applied to u in [0, 1)."""
    return -mu * np.log1p(-np.asarray(u, dtype=float))


def gpd_from_uniform(u, xi: float, beta: float = 1.0):
    """Inverse GPD CDF ``(beta/xi)((1-u)^-xi - 1)``; exponential limit near xi = 0."""
    u = np.asarray(u, dtype=float)
    if abs(xi) < XI_ZERO_TOL:
        return exponential_from_uniform(u, beta)
    return (beta / xi) * np.expm1(-xi * np.log1p(-u))


def draw_exponential(mu: float, size, rng: RandomSource) -> np.ndarray:
    if not (mu > 0):
        raise InvalidParameterError(f"exponential mean must be positive, got {mu}")
    return exponential_from_uniform(rng.uniform(size), mu)


def draw_gpd(params: GpdParams, size, rng: RandomSource) -> np.ndarray:
    if params.xi < 0:
        raise UnsupportedAlternativeError("sampling is only supported for xi >= 0")
    return gpd_from_uniform(rng.uniform(size), params.xi, params.beta)


def draw_abs_student(params: StudentParams, size, rng: RandomSource) -> np.ndarray:
    g = rng.generator
    z = g.standard_normal(size)
    v = g.chisquare(params.nu, size)
    return np.abs(z / np.sqrt(v / params.nu))


def _as_sample(values):
    from .empirics import Sample

    return Sample(values)


def sample_exponential(mu: float, n: int, rng: RandomSource):
    _check_count(n)
    return _as_sample(draw_exponential(mu, int(n), rng))


def sample_gpd(params: GpdParams, n: int, rng: RandomSource):
    _check_count(n)
    return _as_sample(draw_gpd(params, int(n), rng))


def sample_abs_student(params: StudentParams, n: int, rng: RandomSource):
    _check_count(n)
    return _as_sample(draw_abs_student(params, int(n), rng))


def exp_conditional_moments(t: float, mu: float = 1.0) -> tuple:
    """Partial moments ``E[X^k 1(X > t)]``, k = 0..4, of an exponential with mean mu."""
    if t < 0 or not (mu > 0):
        raise InvalidParameterError("need t >= 0 and mu > 0")
    s = t / mu
    e = math.exp(-s)
    unit = (
        e,
        e * (1 + s),
        e * (2 + s * (2 + s)),
        e * (6 + s * (6 + s * (3 + s))),
        e * (24 + s * (24 + s * (12 + s * (4 + s)))),
    )
    return tuple(mu**k * m for k, m in enumerate(unit))


def gpd_residual_cv(xi: float) -> float:
    """Constant residual coefficient of variation of a GPD with shape xi."""
    if xi >= 0.5:
        raise InfiniteVarianceError(f"GPD variance is infinite for xi >= 1/2 (xi={xi})")
    return 1.0 / math.sqrt(1.0 - 2.0 * xi)


@dataclass(frozen=True)
class Alternative:
    """A sampling model for simulations: ``exp``, ``gpd`` or ``abst``.

    ``param`` is the mean for ``exp``, the shape xi for ``gpd`` (unit scale
    unless ``scale`` is given) and the degrees of freedom for ``abst``.
    """

    family: str
    param: float = 1.0
    scale: float = 1.0
    _impl: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family == "exp":
            if not (self.param > 0):
                raise InvalidParameterError("exponential mean must be positive")
            impl = None
        elif self.family == "gpd":
            impl = GpdParams(self.param, self.scale)
            if impl.xi < 0:
                raise UnsupportedAlternativeError("sampling is only supported for xi >= 0")
        elif self.family == "abst":
            impl = StudentParams(self.param)
        else:
            raise InvalidParameterError(f"unknown family {self.family!r}")
        object.__setattr__(self, "_impl", impl)

    @classmethod
    def parse(cls, text: str) -> "Alternative":
        """Parse ``exp``, ``exp:2``, ``gpd:0.25``, ``gpd:0.25:3`` or ``abst:4``."""
        parts = text.strip().split(":")
        family = parts[0].lower()
        try:
            nums = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise InvalidParameterError(f"unrecognized model {text!r}") from exc
        if family == "exp":
            return cls("exp", nums[0] if nums else 1.0)
        if family in ("gpd", "pareto") and nums:
            return cls("gpd", nums[0], nums[1] if len(nums) > 1 else 1.0)
        if family in ("abst", "t") and nums:
            return cls("abst", nums[0])
        raise InvalidParameterError(f"unrecognized model {text!r}")

    def label(self) -> str:
        if self.family == "gpd":
            return f"gpd:{self.param:g}" + ("" if self.scale == 1.0 else f":{self.scale:g}")
        return f"{self.family}:{self.param:g}"

    def draw(self, size, rng: RandomSource) -> np.ndarray:
        if self.family == "exp":
            return draw_exponential(self.param, size, rng)
        if self.family == "gpd":
            return draw_gpd(self._impl, size, rng)
        return draw_abs_student(self._impl, size, rng)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "exp":
            return np.where(x <= 0, 0.0, -np.expm1(-np.maximum(x, 0) / self.param))
        if self.family == "gpd":
            return self._impl.cdf(x)
        return self._impl.abs_cdf(x)


NULL = Alternative("exp", 1.0)
