"""Large-sample null law of the dyadic multi-threshold statistic.

Under exponentiality the weighted CV vector has covariance
``2^{-|i-j|/2}``, so the statistic converges to ``sum_i lambda_i Z_i^2``
with ``lambda_i`` the eigenvalues of that matrix.  The mixture is further
approximated by ``a + b * chi2(nu)`` matching three moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, NumericalFailureError

MAX_ORDER = 32
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def build_sigma(m: int) -> np.ndarray:
    """Covariance matrix ``(2^{-|i-j|/2})`` of order ``m + 1``."""
    if int(m) != m or not 0 <= m <= MAX_ORDER:
        raise InvalidParameterError(f"m must be an integer in 0..{MAX_ORDER}")
    idx = np.arange(m + 1)
    return 2.0 ** (-np.abs(idx[:, None] - idx[None, :]) / 2.0)


def jacobi_eigh(a: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` in the order produced by the
    sweeps (unsorted); column ``i`` of the vector matrix pairs with
    eigenvalue ``i``.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidParameterError("matrix must be square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-14):
        raise InvalidParameterError("matrix must be symmetric")
    size = a.shape[0]
    v = np.eye(size)
    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a)))
        if size < 2 or off.max() < tol:
            return np.diag(a).copy(), v
        for p in range(size - 1):
            for q in range(p + 1, size):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                # rotation angle zeroing a[p, q] (stable small-angle form)
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise NumericalFailureError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


@dataclass(frozen=True)
class EigenSpectrum:
    lambdas: tuple

    def __post_init__(self):
        if not self.lambdas:
            raise InvalidParameterError("spectrum needs at least one eigenvalue")
        if any(not (x > 0) for x in self.lambdas):
            raise InvalidParameterError("eigenvalues must be positive")

    @property
    def m(self) -> int:
        return len(self.lambdas) - 1

    def power_sum(self, r: int) -> float:
        return math.fsum(x**r for x in self.lambdas)

    def as_array(self) -> np.ndarray:
        return np.array(self.lambdas)


def eigenvalues(sigma: np.ndarray) -> EigenSpectrum:
    """Eigenvalues of a covariance matrix, sorted descending."""
    vals, _ = jacobi_eigh(sigma)
    return EigenSpectrum(tuple(sorted(vals.tolist(), reverse=True)))


def spectrum_for_order(m: int) -> EigenSpectrum:
    return eigenvalues(build_sigma(m))


# -- chi-square tail through the regularized incomplete gamma function ------

_EPS = 1e-16
_FPMIN = 1e-300


def _gamma_p_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise NumericalFailureError("incomplete gamma series did not converge")
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise NumericalFailureError("incomplete gamma continued fraction did not converge")
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma ``Q(a, x)``."""
    if not a > 0 or x < 0:
        raise InvalidParameterError("need a > 0 and x >= 0")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_contfrac(a, x)


def chi2_sf(x: float, nu: float) -> float:
    """``P(chi2_nu > x)`` for real ``nu > 0``."""
    if not nu > 0:
        raise InvalidParameterError("degrees of freedom must be positive")
    if x < 0:
        raise InvalidParameterError("x must be non-negative")
    return min(1.0, max(0.0, gamma_q(nu / 2.0, x / 2.0)))


def chi2_isf(p: float, nu: float) -> float:
    """Inverse of :func:`chi2_sf` by bracketing and bisection."""
    if not 0 < p <= 1:
        raise InvalidParameterError("p must be in (0, 1]")
    if p == 1:
        return 0.0
    lo, hi = 0.0, max(1.0, nu)
    while chi2_sf(hi, nu) > p:
        lo, hi = hi, hi * 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi2_sf(mid, nu) > p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ChiSquareApprox:
    """``a + b * chi2(nu)`` matching the first three moments of the mixture."""

    a: float
    b: float
    nu: float

    def sf(self, t: float) -> float:
        return approx_pvalue(t, self)

    def quantile(self, level: float) -> float:
        return self.a + self.b * chi2_isf(1.0 - level, self.nu)

    def moments(self) -> tuple:
        """Mean, variance and third central moment."""
        return (
            self.a + self.b * self.nu,
            2.0 * self.b**2 * self.nu,
            8.0 * self.b**3 * self.nu,
        )


def moment_match(spectrum: EigenSpectrum) -> ChiSquareApprox:
    s1, s2, s3 = (spectrum.power_sum(r) for r in (1, 2, 3))
    return ChiSquareApprox(a=s1 - s2 * s2 / s3, b=s3 / s2, nu=s2**3 / s3**2)


def approx_pvalue(t_obs: float, approx: ChiSquareApprox) -> float:
    if not approx.b > 0:
        raise InvalidParameterError("scale b must be positive")
    if t_obs <= approx.a:
        return 1.0
    return min(1.0, max(0.0, chi2_sf((t_obs - approx.a) / approx.b, approx.nu)))


def mixture_moments(spectrum: EigenSpectrum) -> tuple:
    """Mean, variance and third central moment of ``sum lambda_i Z_i^2``."""
    return spectrum.power_sum(1), 2.0 * spectrum.power_sum(2), 8.0 * spectrum.power_sum(3)


class EmpiricalDistribution:
    """Sorted simulated draws with type-7 quantiles and tail fractions."""

    def __init__(self, draws):
        arr = np.sort(np.asarray(draws, dtype=float).ravel())
        if arr.size == 0:
            raise InvalidParameterError("empty simulation")
        arr.flags.writeable = False
        self.draws = arr

    def __len__(self):
        return int(self.draws.size)

    @property
    def reps(self) -> int:
        return len(self)

    def quantile(self, level):
        return np.quantile(self.draws, level, method="linear")

    def mean(self) -> float:
        return float(self.draws.mean())

    def count_ge(self, x: float) -> int:
        return int(self.draws.size - np.searchsorted(self.draws, x, side="left"))

    def count_le(self, x: float) -> int:
        return int(np.searchsorted(self.draws, x, side="right"))

    def survival_fraction(self, x: float) -> float:
        return self.count_ge(x) / self.draws.size

    def upper_pvalue(self, x: float) -> float:
        """Add-one upper-tail p-value ``(1 + #{draw >= x}) / (reps + 1)``."""
        return (1 + self.count_ge(x)) / (self.draws.size + 1)

    def lower_pvalue(self, x: float) -> float:
        return (1 + self.count_le(x)) / (self.draws.size + 1)

    def two_sided_pvalue(self, x: float) -> float:
        return min(1.0, 2.0 * min(self.lower_pvalue(x), self.upper_pvalue(x)))


ASYM_BLOCK = 10_000


def sample_asymptotic_T(spectrum: EigenSpectrum, reps: int, rng) -> EmpiricalDistribution:
    """Draws of ``sum lambda_i Z_i^2`` in fixed-size blocks on child streams."""
    if reps < 1:
        raise InvalidParameterError("reps must be positive")
    lam = spectrum.as_array()
    out = []
    for b, start in enumerate(range(0, reps, ASYM_BLOCK)):
        size = min(ASYM_BLOCK, reps - start)
        z = rng.child(b).generator.standard_normal((size, lam.size))
        out.append((z * z) @ lam)
    return EmpiricalDistribution(np.concatenate(out))


def rho_exponential(s: float, t: float, mu: float = 1.0) -> float:
    """Limit covariance ``exp(min(s, t)/mu)`` of ``sqrt(n)(cv(t) - 1)`` under the null."""
    if s < 0 or t < 0 or not mu > 0:
        raise InvalidParameterError("need s, t >= 0 and mu > 0")
    return math.exp(min(s, t) / mu)


def rho_normalized(s: float, t: float, mu: float = 1.0) -> float:
    """Correlation ``exp(-|s - t|/(2 mu))`` of the tail-size-normalized process."""
    return rho_exponential(s, t, mu) / math.sqrt(rho_exponential(s, s, mu) * rho_exponential(t, t, mu))
